//! Seeded synthetic instances and reference-solution pools.
//!
//! Nodes are split into contiguous scheduler blocks. A lane network (ring
//! lanes inside each block, random extra internal lanes, random cross-block
//! lanes, per-lane mileage) is drawn from the network seed, so instances that
//! share it see recurring origin/destination pairs. Arcs, attributes and the
//! initial assignment are drawn from the instance seed.

mod pool;
mod random;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compat::{builtin_matrix, CompatMatrix, Direction};
use crate::network::{ArcData, Instance, InstanceData, InstanceError};

pub use pool::{
    generate_reference_pool, references_for, weekly_params, write_manifest, ManifestRow,
    PoolOptions, Reference,
};
pub use random::{random_small_instance, SmallParams};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid class parameters: {0}")]
    Params(String),
    #[error("initial imbalance band [{lo}, {hi}] not reached in {attempts} attempts (achieved {min}..={max})")]
    Band {
        lo: i64,
        hi: i64,
        attempts: usize,
        min: i64,
        max: i64,
    },
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("reference pool needs at least one instance per class")]
    EmptyPool,
    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),
    #[error("reference solve for `{0}` found no feasible assignment")]
    NoReference(String),
}

/// Which substitution matrix shapes the candidate sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixChoice {
    /// The built-in 14-type table, truncated to the first k resources.
    #[default]
    Builtin,
    /// Every resource substitutes for every other.
    Full,
    /// No substitution at all.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassParams {
    #[serde(default = "default_label")]
    pub label: String,
    pub schedulers: usize,
    pub nodes: usize,
    pub arcs: usize,
    pub resources: usize,
    /// Accepted range for the initial imbalance, inclusive.
    #[serde(default)]
    pub imbalance_band: Option<(i64, i64)>,
    #[serde(default)]
    pub matrix: MatrixChoice,
    #[serde(default)]
    pub direction: Direction,
    /// Fraction of arcs whose endpoints lie in different schedulers.
    pub collaboration: f64,
    pub seed: u64,
    /// Seed of the lane network; defaults to `seed`.
    #[serde(default)]
    pub network_seed: Option<u64>,
}

fn default_label() -> String {
    "custom".to_string()
}

impl ClassParams {
    /// Small class used throughout the tests and the CLI defaults:
    /// exact solving stays tractable.
    pub fn desk(seed: u64) -> Self {
        ClassParams {
            label: "desk".into(),
            schedulers: 3,
            nodes: 9,
            arcs: 18,
            resources: 8,
            imbalance_band: None,
            matrix: MatrixChoice::Builtin,
            direction: Direction::RowToColumn,
            collaboration: 0.3,
            seed,
            network_seed: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn matrix(&self) -> CompatMatrix {
        let ids: Vec<String> = (1..=self.resources).map(|i| format!("r{i}")).collect();
        match self.matrix {
            MatrixChoice::Builtin => builtin_matrix().truncated(self.resources),
            MatrixChoice::Identity => CompatMatrix::identity(ids),
            MatrixChoice::Full => {
                let n = ids.len();
                CompatMatrix::new(ids, vec![vec![true; n]; n]).expect("full matrix is valid")
            }
        }
        .with_direction(self.direction)
    }

    fn check(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::Params(m.to_string()));
        if self.schedulers == 0 || self.nodes == 0 || self.arcs == 0 || self.resources == 0 {
            return bad("counts must be at least 1");
        }
        if self.schedulers > self.nodes {
            return bad("more schedulers than nodes");
        }
        if self.arcs < self.nodes {
            return bad("arc count must be at least the node count");
        }
        if self.matrix == MatrixChoice::Builtin && self.resources > 14 {
            return bad("the built-in matrix has 14 resources");
        }
        if !(0.0..=1.0).contains(&self.collaboration) {
            return bad("collaboration ratio must lie in [0, 1]");
        }
        if let Some((lo, hi)) = self.imbalance_band {
            if lo > hi {
                return bad("imbalance band is empty");
            }
        }
        Ok(())
    }
}

fn id_width(n: usize) -> usize {
    n.to_string().len().max(2)
}

/// Contiguous near-equal blocks; block i gets the i-th slice of nodes.
fn blocks(nodes: usize, schedulers: usize) -> Vec<std::ops::Range<usize>> {
    (0..schedulers)
        .map(|s| (s * nodes / schedulers)..((s + 1) * nodes / schedulers))
        .collect()
}

struct Lane {
    from: usize,
    to: usize,
    miles: f64,
}

struct Network {
    ring: Vec<Lane>,
    internal: Vec<Lane>,
    cross: Vec<Lane>,
    /// Preferred resource offset per (scheduler, tod half, size class).
    preference: Vec<[[f64; 3]; 2]>,
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn build_network(p: &ClassParams, cross_arcs: usize) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(p.network_seed.unwrap_or(p.seed) ^ 0x6e65_7477);
    let bl = blocks(p.nodes, p.schedulers);
    let mut ring = Vec::new();
    for b in &bl {
        let m = b.len();
        if m < 2 {
            continue;
        }
        for k in 0..m {
            ring.push(Lane {
                from: b.start + k,
                to: b.start + (k + 1) % m,
                miles: log_uniform(&mut rng, 10.0, 2000.0),
            });
        }
    }
    let mut internal = Vec::new();
    let multi: Vec<&std::ops::Range<usize>> = bl.iter().filter(|b| b.len() >= 2).collect();
    if !multi.is_empty() {
        for _ in 0..ring.len() {
            let b = multi[rng.gen_range(0..multi.len())];
            let from = rng.gen_range(b.clone());
            let mut to = rng.gen_range(b.start..b.end - 1);
            if to >= from {
                to += 1;
            }
            internal.push(Lane {
                from,
                to,
                miles: log_uniform(&mut rng, 10.0, 2000.0),
            });
        }
    }
    let owner = |n: usize| bl.iter().position(|b| b.contains(&n)).unwrap();
    let mut cross = Vec::new();
    if p.schedulers >= 2 {
        let count = cross_arcs.clamp(1, p.nodes.max(2));
        while cross.len() < count {
            let from = rng.gen_range(0..p.nodes);
            let to = rng.gen_range(0..p.nodes);
            if owner(from) != owner(to) {
                cross.push(Lane {
                    from,
                    to,
                    miles: log_uniform(&mut rng, 10.0, 2000.0),
                });
            }
        }
    }
    let preference = (0..p.schedulers)
        .map(|_| {
            let mut day = [[0.0; 3]; 2];
            for half in &mut day {
                for class in half.iter_mut() {
                    *class = rng.gen::<f64>();
                }
            }
            day
        })
        .collect();
    Network {
        ring,
        internal,
        cross,
        preference,
    }
}

const SIZE_CLASSES: [&str; 3] = ["small", "medium", "large"];

/// Resource index range serving a size class: contiguous thirds.
fn class_group(resources: usize, class: usize) -> std::ops::Range<usize> {
    let lo = class * resources / 3;
    let hi = ((class + 1) * resources / 3).max(lo + 1).min(resources);
    lo.min(resources - 1)..hi
}

/// Generate one instance; retries the initial assignment until I₀ falls in
/// the requested band.
pub fn generate_instance(p: &ClassParams) -> Result<Instance, GenError> {
    p.check()?;
    let cross_arcs = (p.collaboration * p.arcs as f64).round() as usize;
    let internal_arcs = p.arcs - cross_arcs;
    if cross_arcs > 0 && p.schedulers < 2 {
        return Err(GenError::Params(
            "cross-scheduler arcs need at least two schedulers".into(),
        ));
    }
    let bl = blocks(p.nodes, p.schedulers);
    if internal_arcs > 0 && bl.iter().all(|b| b.len() < 2) {
        return Err(GenError::Params(
            "internal arcs need a scheduler with at least two nodes".into(),
        ));
    }
    let net = build_network(p, cross_arcs);
    let matrix = p.matrix();
    let resources: Vec<String> = matrix.resources().to_vec();
    let w = id_width(p.nodes);
    let node_ids: Vec<String> = (1..=p.nodes).map(|i| format!("n{i:0w$}")).collect();
    let sw = if p.schedulers > 9 {
        id_width(p.schedulers)
    } else {
        1
    };
    let schedulers: BTreeMap<String, Vec<String>> = bl
        .iter()
        .enumerate()
        .map(|(s, b)| (format!("s{:0sw$}", s + 1), node_ids[b.clone()].to_vec()))
        .collect();
    let owner = |n: usize| bl.iter().position(|b| b.contains(&n)).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    // lanes per arc
    let mut lanes: Vec<&Lane> = Vec::with_capacity(p.arcs);
    let internal_pool: Vec<&Lane> = net.ring.iter().chain(&net.internal).collect();
    for k in 0..internal_arcs {
        lanes.push(match net.ring.get(k) {
            Some(l) => l,
            None => internal_pool[rng.gen_range(0..internal_pool.len())],
        });
    }
    for _ in 0..cross_arcs {
        lanes.push(&net.cross[rng.gen_range(0..net.cross.len())]);
    }
    lanes.shuffle(&mut rng);

    let volumes: Vec<f64> = (0..p.arcs).map(|_| rng.gen_range(1.0..=100.0)).collect();
    let tods: Vec<f64> = (0..p.arcs).map(|_| rng.gen_range(0.0..24.0)).collect();
    let tows: Vec<f64> = (0..p.arcs).map(|_| rng.gen_range(0.0..168.0)).collect();
    let mut by_volume: Vec<usize> = (0..p.arcs).collect();
    by_volume.sort_by(|&x, &y| volumes[x].total_cmp(&volumes[y]).then(x.cmp(&y)));
    let mut class = vec![0usize; p.arcs];
    for (rank, &a) in by_volume.iter().enumerate() {
        class[a] = rank * 3 / p.arcs;
    }

    let aw = id_width(p.arcs);
    let attempts = 64;
    let (mut lo_seen, mut hi_seen) = (i64::MAX, i64::MIN);
    for attempt in 0..attempts {
        let mut arcs = Vec::with_capacity(p.arcs);
        for a in 0..p.arcs {
            let lane = lanes[a];
            let group = class_group(resources.len(), class[a]);
            let half = usize::from(tods[a] >= 12.0);
            let pref = net.preference[owner(lane.from)][half][class[a]];
            let preferred = group.start + (pref * group.len() as f64) as usize;
            let initial = if rng.gen_bool(0.75) {
                preferred.min(group.end - 1)
            } else {
                rng.gen_range(group.clone())
            };
            let initial_id = resources[initial].clone();
            arcs.push(ArcData {
                id: format!("a{:0aw$}", a + 1),
                from: node_ids[lane.from].clone(),
                to: node_ids[lane.to].clone(),
                volume: round3(volumes[a]),
                tod: round3(tods[a]).min(23.999),
                tow: round3(tows[a]).min(167.999),
                miles: round3(lane.miles),
                size_class: SIZE_CLASSES[class[a]].to_string(),
                candidates: matrix
                    .candidates_for(&initial_id)
                    .expect("initial drawn from the matrix"),
                initial: initial_id,
            });
        }
        let data = InstanceData {
            nodes: node_ids.clone(),
            schedulers: schedulers.clone(),
            resources: resources.clone(),
            arcs,
            meta: serde_json::Value::Null,
        };
        let inst = data.validate()?;
        let i0 =
            crate::network::total_imbalance(&inst, &crate::network::Assignment::initial(&inst))
                .expect("initial assignment is total")
                .total;
        lo_seen = lo_seen.min(i0);
        hi_seen = hi_seen.max(i0);
        let in_band = p
            .imbalance_band
            .is_none_or(|(lo, hi)| (lo..=hi).contains(&i0));
        if in_band {
            let meta = serde_json::json!({
                "class": p.label,
                "seed": p.seed,
                "network_seed": p.network_seed.unwrap_or(p.seed),
                "attempt": attempt,
                "i0": i0,
                "params": p,
            });
            return Ok(inst.with_meta(meta));
        }
    }
    let (lo, hi) = p.imbalance_band.expect("only a band can fail");
    Err(GenError::Band {
        lo,
        hi,
        attempts,
        min: lo_seen,
        max: hi_seen,
    })
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Three schedulers with three nodes each and six resources, built so that
/// the efficient Stage 2 optimum puts four changes on one scheduler while the
/// minimax optimum spreads two changes to every scheduler.
///
/// Two disjoint 5-arc cycles use resource pairs (A, B) and (C, D). In each
/// cycle the heavy scheduler owns two arcs of the first resource and one of
/// the second; the other two schedulers own one arc each of the second.
/// Balancing a cycle means making it uniform: two changes on the heavy
/// scheduler, or three changes spread one per scheduler. A fixed pair of
/// opposite arcs on the last two resources keeps four units of imbalance
/// that no substitution can remove.
pub fn generate_example1(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<String> = (1..=9).map(|i| format!("n{i}")).collect();
    let mut roles = [0usize, 1, 2];
    roles.shuffle(&mut rng);
    let (heavy, light1, light2) = (roles[0], roles[1], roles[2]);
    let node = |s: usize, k: usize| nodes[3 * s + k].clone();
    let mut res = [0usize, 1, 2, 3, 4, 5];
    res[..4].shuffle(&mut rng);
    let r = |i: usize| format!("r{}", res[i] + 1);

    let mut arcs = Vec::new();
    let mut push = |from: String, to: String, pair: (usize, usize), initial: usize| {
        let id = format!("a{:02}", arcs.len() + 1);
        arcs.push(ArcData {
            id,
            from,
            to,
            volume: round3(rng.gen_range(1.0..=100.0)),
            tod: round3(rng.gen_range(0.0..23.9)),
            tow: round3(rng.gen_range(0.0..167.9)),
            miles: round3(log_uniform(&mut rng, 10.0, 2000.0)),
            size_class: "medium".into(),
            candidates: if pair.0 == pair.1 {
                vec![r(pair.0)]
            } else {
                vec![r(pair.0), r(pair.1)]
            },
            initial: r(initial),
        });
    };
    // cycle X on (A, B): h0 -A-> h1 -A-> h2 -B-> l1 -B-> l2 -B-> h0
    push(node(heavy, 0), node(heavy, 1), (0, 1), 0);
    push(node(heavy, 1), node(heavy, 2), (0, 1), 0);
    push(node(heavy, 2), node(light1, 0), (0, 1), 1);
    push(node(light1, 0), node(light2, 0), (0, 1), 1);
    push(node(light2, 0), node(heavy, 0), (0, 1), 1);
    // cycle Y on (C, D): h1 -C-> h2 -C-> h0 -D-> l1' -D-> l2' -D-> h1
    push(node(heavy, 1), node(heavy, 2), (2, 3), 2);
    push(node(heavy, 2), node(heavy, 0), (2, 3), 2);
    push(node(heavy, 0), node(light1, 1), (2, 3), 3);
    push(node(light1, 1), node(light2, 1), (2, 3), 3);
    push(node(light2, 1), node(heavy, 1), (2, 3), 3);
    // fixed imbalance on E / F
    push(node(light1, 2), node(light2, 2), (4, 4), 4);
    push(node(light2, 2), node(light1, 2), (5, 5), 5);

    let schedulers = (0..3)
        .map(|s| (format!("s{}", s + 1), nodes[3 * s..3 * s + 3].to_vec()))
        .collect();
    InstanceData {
        nodes: nodes.clone(),
        schedulers,
        resources: (1..=6).map(|i| format!("r{i}")).collect(),
        arcs,
        meta: serde_json::json!({ "class": "example1", "seed": seed }),
    }
    .validate()
    .expect("example instance is valid")
}
