//! Iterated local search from the incumbent assignment.

use std::time::Instant;

use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::exact::node_lower_bound;
use super::{objective_of, Solution, Status};
use crate::models::{EvalState, ModelSpec};
use crate::network::Assignment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IlsParams {
    /// Perturbation rounds without improvement before stopping.
    pub iters: u64,
    /// Arcs reassigned per perturbation; `None` uses max(2, ⌈0.02·|A|⌉).
    pub perturb: Option<usize>,
}

impl Default for IlsParams {
    fn default() -> Self {
        IlsParams {
            iters: 50,
            perturb: None,
        }
    }
}

/// (cap excess, scaled objective, changes); compared lexicographically.
type Key = (i64, i64, i64);

fn key(spec: &ModelSpec<'_>, st: &EvalState<'_>) -> Key {
    let c = st.components();
    let excess = spec.istar().map_or(0, |cap| (c.imbalance - cap).max(0));
    (excess, spec.scaled_objective(&c), c.changes)
}

fn key_after(spec: &ModelSpec<'_>, st: &mut EvalState<'_>, a: usize, r: usize) -> Key {
    let c = st.components_after(a, r);
    let excess = spec.istar().map_or(0, |cap| (c.imbalance - cap).max(0));
    (excess, spec.scaled_objective(&c), c.changes)
}

/// Best-improvement descent over single-arc moves; ties keep the first move
/// in (arc, resource) order.
fn descend(spec: &ModelSpec<'_>, st: &mut EvalState<'_>) -> u64 {
    let cands = spec.candidates();
    let mut moves = 0;
    let mut current = key(spec, st);
    loop {
        let mut best: Option<(Key, usize, usize)> = None;
        for a in 0..cands.len() {
            let here = st.resource(a);
            for &r in cands.get(a) {
                if r == here {
                    continue;
                }
                let k = key_after(spec, st, a, r);
                if k < current && best.is_none_or(|(b, _, _)| k < b) {
                    best = Some((k, a, r));
                }
            }
        }
        match best {
            Some((k, a, r)) => {
                st.apply(a, r);
                current = k;
                moves += 1;
            }
            None => return moves,
        }
    }
}

pub fn solve_ils(spec: &ModelSpec<'_>, seed: u64, params: IlsParams) -> Solution {
    let started = Instant::now();
    let inst = spec.instance();
    let cands = spec.candidates();
    let n = inst.num_arcs();
    let p = params
        .perturb
        .unwrap_or_else(|| 2.max((n as f64 * 0.02).ceil() as usize))
        .min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut current = EvalState::new(inst, &Assignment::initial(inst));
    let mut moves = descend(spec, &mut current);
    let mut current_key = key(spec, &current);
    let mut stale = 0;
    let mut rounds = 0;
    let movable: Vec<usize> = (0..n).filter(|&a| cands.get(a).len() > 1).collect();
    while stale < params.iters && !movable.is_empty() {
        rounds += 1;
        let mut trial = current.clone();
        for _ in 0..p {
            let a = movable[rng.gen_range(0..movable.len())];
            let set = cands.get(a);
            trial.apply(a, set[rng.gen_range(0..set.len())]);
        }
        moves += descend(spec, &mut trial);
        let k = key(spec, &trial);
        if k < current_key {
            stale = 0;
        } else {
            stale += 1;
        }
        if k <= current_key {
            current = trial;
            current_key = k;
        }
    }

    let root = node_lower_bound(spec, &vec![None; n]);
    let wall_ms = started.elapsed().as_millis() as u64;
    let denom = spec.denominator();
    let bound = root.map(|b| Rational64::new(b, denom));
    if current_key.0 > 0 {
        return Solution {
            status: Status::LimitReached,
            assignment: None,
            objective: None,
            bound,
            nodes: moves,
            iterations: rounds,
            wall_ms,
            seed: Some(seed),
            trace: Vec::new(),
        };
    }
    let phi = current.assignment();
    let status = if root == Some(current_key.1) {
        Status::Optimal
    } else {
        Status::Feasible
    };
    Solution {
        status,
        objective: Some(objective_of(spec, &phi)),
        assignment: Some(phi),
        bound,
        nodes: moves,
        iterations: rounds,
        wall_ms,
        seed: Some(seed),
        trace: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::CandidateSets;
    use crate::fixtures;
    use crate::models::{build_stage1, build_stage2_efficient};

    #[test]
    fn d1_stage1_reaches_zero() {
        let d1 = fixtures::d1();
        let spec = build_stage1(&d1, CandidateSets::full(&d1)).unwrap();
        for seed in 0..5 {
            let s = solve_ils(&spec, seed, IlsParams::default());
            assert_eq!(s.value(), Some(Rational64::from_integer(0)));
            assert_eq!(s.status, Status::Optimal);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let d1 = fixtures::d1();
        let spec = build_stage2_efficient(&d1, CandidateSets::full(&d1), 0).unwrap();
        let a = solve_ils(&spec, 9, IlsParams::default());
        let b = solve_ils(&spec, 9, IlsParams::default());
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.value(), Some(Rational64::from_integer(1)));
    }

    #[test]
    fn unreachable_cap_reports_limit() {
        let t1 = fixtures::t1();
        let spec = build_stage2_efficient(&t1, CandidateSets::full(&t1), -1).unwrap();
        let s = solve_ils(&spec, 1, IlsParams::default());
        assert_eq!(s.status, Status::LimitReached);
        assert!(s.assignment.is_none());
    }
}
