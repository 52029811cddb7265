//! Tiny random instances for oracle comparisons.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::{ArcData, Instance, InstanceData};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmallParams {
    pub max_arcs: usize,
    pub max_resources: usize,
    pub max_schedulers: usize,
    pub max_nodes: usize,
}

impl Default for SmallParams {
    fn default() -> Self {
        SmallParams {
            max_arcs: 10,
            max_resources: 4,
            max_schedulers: 3,
            max_nodes: 6,
        }
    }
}

/// A random instance with arbitrary candidate subsets (each containing the
/// initial resource), occasional self-loops and parallel arcs.
pub fn random_small_instance(seed: u64, p: SmallParams) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = rng.gen_range(2..=p.max_nodes.max(2));
    let schedulers = rng.gen_range(1..=p.max_schedulers.clamp(1, nodes));
    let resources = rng.gen_range(1..=p.max_resources.max(1));
    let arcs = rng.gen_range(1..=p.max_arcs.max(1));

    let node_ids: Vec<String> = (1..=nodes).map(|i| format!("n{i}")).collect();
    let res_ids: Vec<String> = (1..=resources).map(|i| format!("r{i}")).collect();
    // random contiguous partition with nonempty blocks
    let mut cuts: Vec<usize> = (1..nodes).collect();
    for i in 0..cuts.len() {
        let j = rng.gen_range(i..cuts.len());
        cuts.swap(i, j);
    }
    let mut cuts: Vec<usize> = cuts[..schedulers - 1].to_vec();
    cuts.sort_unstable();
    cuts.insert(0, 0);
    cuts.push(nodes);
    let scheds: BTreeMap<String, Vec<String>> = cuts
        .windows(2)
        .enumerate()
        .map(|(s, w)| (format!("s{}", s + 1), node_ids[w[0]..w[1]].to_vec()))
        .collect();

    let arc_data = (0..arcs)
        .map(|k| {
            let from = rng.gen_range(0..nodes);
            let to = if rng.gen_bool(0.05) {
                from
            } else {
                let t = rng.gen_range(0..nodes - 1);
                if t >= from {
                    t + 1
                } else {
                    t
                }
            };
            let initial = rng.gen_range(0..resources);
            let candidates: Vec<String> = (0..resources)
                .filter(|&r| r == initial || rng.gen_bool(0.6))
                .map(|r| res_ids[r].clone())
                .collect();
            ArcData {
                id: format!("a{:02}", k + 1),
                from: node_ids[from].clone(),
                to: node_ids[to].clone(),
                volume: rng.gen_range(1.0..100.0),
                tod: rng.gen_range(0.0..24.0),
                tow: rng.gen_range(0.0..168.0),
                miles: rng.gen_range(10.0..2000.0),
                size_class: "medium".into(),
                candidates,
                initial: res_ids[initial].clone(),
            }
        })
        .collect();
    InstanceData {
        nodes: node_ids,
        schedulers: scheds,
        resources: res_ids,
        arcs: arc_data,
        meta: serde_json::json!({ "class": "random-small", "seed": seed }),
    }
    .validate()
    .expect("random instance is valid")
}
