//! Independent betweenness oracle: per-source BFS path counting combined
//! pairwise, no dependency accumulation.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resub_core::network::{ArcData, Instance, InstanceData};

/// Random sparse digraph with occasional parallel arcs and self-loops.
pub fn random_digraph(seed: u64, max_nodes: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_nodes);
    digraph(&mut rng, n)
}

pub fn digraph(rng: &mut ChaCha8Rng, n: usize) -> Instance {
    let m = rng.gen_range(1..=3 * n);
    let nodes: Vec<String> = (0..n).map(|i| format!("v{i:02}")).collect();
    let arcs = (0..m)
        .map(|k| {
            let from = rng.gen_range(0..n);
            let to = if rng.gen_bool(0.03) {
                from
            } else {
                rng.gen_range(0..n)
            };
            ArcData {
                id: format!("e{k:03}"),
                from: nodes[from].clone(),
                to: nodes[to].clone(),
                volume: 1.0,
                tod: 0.0,
                tow: 0.0,
                miles: 1.0,
                size_class: "medium".into(),
                candidates: vec!["r1".into()],
                initial: "r1".into(),
            }
        })
        .collect();
    InstanceData {
        nodes: nodes.clone(),
        schedulers: BTreeMap::from([("s1".to_string(), nodes)]),
        resources: vec!["r1".into()],
        arcs,
        meta: serde_json::Value::Null,
    }
    .validate()
    .unwrap()
}

/// Hop distances and shortest-path counts from `s`, by plain BFS.
pub fn bfs_counts(inst: &Instance, s: usize) -> (Vec<Option<usize>>, Vec<f64>) {
    let n = inst.num_nodes();
    let mut dist = vec![None; n];
    let mut sigma = vec![0.0; n];
    dist[s] = Some(0);
    sigma[s] = 1.0;
    let mut queue = VecDeque::from([s]);
    let mut order = Vec::new();
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for arc in inst.arcs().iter().filter(|a| a.from == u && a.to != u) {
            if dist[arc.to].is_none() {
                dist[arc.to] = Some(dist[u].unwrap() + 1);
                queue.push_back(arc.to);
            }
        }
    }
    for &u in &order {
        for arc in inst.arcs().iter().filter(|a| a.from == u && a.to != u) {
            if dist[arc.to] == Some(dist[u].unwrap() + 1) {
                sigma[arc.to] += sigma[u];
            }
        }
    }
    (dist, sigma)
}

/// B(u→v) = Σ_{s≠t} σ(s,u)·σ(v,t)/σ(s,t) over pairs where the arc lies on a
/// shortest s→t path.
pub fn pair_counting(inst: &Instance) -> Vec<f64> {
    let n = inst.num_nodes();
    let all: Vec<(Vec<Option<usize>>, Vec<f64>)> = (0..n).map(|s| bfs_counts(inst, s)).collect();
    inst.arcs()
        .iter()
        .map(|arc| {
            if arc.from == arc.to {
                return 0.0;
            }
            let mut b = 0.0;
            for s in 0..n {
                for t in 0..n {
                    if s == t {
                        continue;
                    }
                    let (ds, ss) = &all[s];
                    let (dv, sv) = &all[arc.to];
                    if let (Some(su), Some(vt), Some(st)) = (ds[arc.from], dv[t], ds[t]) {
                        if su + 1 + vt == st {
                            b += ss[arc.from] * sv[t] / ss[t];
                        }
                    }
                }
            }
            b
        })
        .collect()
}
