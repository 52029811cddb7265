//! Exhaustive enumeration in lexicographic order.

use std::time::Instant;

use num_rational::Rational64;

use super::{objective_of, Solution, SolverError, Status};
use crate::models::{EvalState, ModelSpec};
use crate::network::Assignment;

/// Largest search space the oracle will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

fn guard(spec: &ModelSpec<'_>) -> Result<(), SolverError> {
    let size = spec.candidates().search_space();
    if size > BRUTE_FORCE_LIMIT {
        return Err(SolverError::SearchSpace {
            size,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    Ok(())
}

/// Visits every assignment in lexicographic order (arc index major,
/// resource index minor). The callback receives the evaluation state.
fn for_each_point(spec: &ModelSpec<'_>, mut visit: impl FnMut(&EvalState<'_>)) -> u64 {
    let inst = spec.instance();
    let cands = spec.candidates();
    let n = inst.num_arcs();
    let mut digits = vec![0usize; n];
    let start = Assignment::new((0..n).map(|a| cands.get(a)[0]).collect());
    let mut state = EvalState::new(inst, &start);
    let mut count = 0u64;
    loop {
        visit(&state);
        count += 1;
        let mut k = n;
        loop {
            if k == 0 {
                return count;
            }
            k -= 1;
            let set = cands.get(k);
            if digits[k] + 1 < set.len() {
                digits[k] += 1;
                state.apply(k, set[digits[k]]);
                break;
            }
            digits[k] = 0;
            state.apply(k, set[0]);
        }
    }
}

/// True optimum with the lexicographically smallest assignment among optima.
pub fn solve_brute_force(spec: &ModelSpec<'_>) -> Result<Solution, SolverError> {
    guard(spec)?;
    let started = Instant::now();
    let mut best: Option<(i64, Assignment)> = None;
    let nodes = for_each_point(spec, |st| {
        let c = st.components();
        if !spec.is_feasible(&c) {
            return;
        }
        let v = spec.scaled_objective(&c);
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, st.assignment()));
        }
    });
    let wall_ms = started.elapsed().as_millis() as u64;
    Ok(match best {
        None => Solution::infeasible(nodes, wall_ms),
        Some((v, phi)) => Solution {
            status: Status::Optimal,
            objective: Some(objective_of(spec, &phi)),
            assignment: Some(phi),
            bound: Some(Rational64::new(v, spec.denominator())),
            nodes,
            iterations: 0,
            wall_ms,
            seed: None,
            trace: Vec::new(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Optima {
    /// Optimal assignments in lexicographic order.
    pub assignments: Vec<Assignment>,
    /// More optima exist beyond the cap.
    pub truncated: bool,
    /// Scaled optimum; `None` when infeasible.
    pub value: Option<i64>,
}

/// All optimal assignments, up to `cap`.
pub fn enumerate_optima(spec: &ModelSpec<'_>, cap: usize) -> Result<Optima, SolverError> {
    if cap < 1 {
        return Err(SolverError::Cap);
    }
    guard(spec)?;
    let mut best: Option<i64> = None;
    for_each_point(spec, |st| {
        let c = st.components();
        if spec.is_feasible(&c) {
            let v = spec.scaled_objective(&c);
            best = Some(best.map_or(v, |b| b.min(v)));
        }
    });
    let Some(target) = best else {
        return Ok(Optima {
            assignments: Vec::new(),
            truncated: false,
            value: None,
        });
    };
    let mut assignments = Vec::new();
    let mut truncated = false;
    for_each_point(spec, |st| {
        let c = st.components();
        if spec.is_feasible(&c) && spec.scaled_objective(&c) == target {
            if assignments.len() < cap {
                assignments.push(st.assignment());
            } else {
                truncated = true;
            }
        }
    });
    Ok(Optima {
        assignments,
        truncated,
        value: Some(target),
    })
}
