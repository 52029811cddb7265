//! Optimizers over assignment space.
//!
//! * [`solve_brute_force`] / [`enumerate_optima`]: exhaustive enumeration,
//!   the reference oracle for small instances.
//! * [`solve_exact`]: depth-first branch-and-bound with admissible bounds.
//! * [`solve_ils`]: iterated local search starting from the incumbent.

mod brute;
mod exact;
mod ils;

use std::time::Duration;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{ratio_to_f64, ModelSpec, ObjectiveValue};
use crate::network::{Assignment, Instance};

pub use brute::{enumerate_optima, solve_brute_force, Optima, BRUTE_FORCE_LIMIT};
pub use exact::{node_lower_bound, solve_exact, solve_exact_with, ExactOptions};
pub use ils::{solve_ils, IlsParams};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SolverError {
    #[error("search space of {size} assignments exceeds the enumeration limit {limit}")]
    SearchSpace { size: u128, limit: u128 },
    #[error("optimum cap must be at least 1")]
    Cap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    Feasible,
    Infeasible,
    LimitReached,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Feasible => "feasible",
            Status::Infeasible => "infeasible",
            Status::LimitReached => "limit-reached",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveLimits {
    pub time: Option<Duration>,
    pub nodes: Option<u64>,
    /// Absolute optimality gap in objective units.
    pub gap: Rational64,
}

impl SolveLimits {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn with_time(mut self, time: Duration) -> Self {
        self.time = Some(time);
        self
    }

    pub fn with_nodes(mut self, nodes: u64) -> Self {
        self.nodes = Some(nodes);
        self
    }
}

/// Incumbent improvement recorded during a search, in scaled units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TracePoint {
    pub nodes: u64,
    pub objective: i64,
    pub bound: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: Status,
    pub assignment: Option<Assignment>,
    pub objective: Option<ObjectiveValue>,
    /// Best proven lower bound on the optimum; `None` when infeasible.
    pub bound: Option<Rational64>,
    pub nodes: u64,
    pub iterations: u64,
    pub wall_ms: u64,
    pub seed: Option<u64>,
    pub trace: Vec<TracePoint>,
}

impl Solution {
    pub(crate) fn infeasible(nodes: u64, wall_ms: u64) -> Self {
        Solution {
            status: Status::Infeasible,
            assignment: None,
            objective: None,
            bound: None,
            nodes,
            iterations: 0,
            wall_ms,
            seed: None,
            trace: Vec::new(),
        }
    }

    pub fn value(&self) -> Option<Rational64> {
        self.objective.as_ref().map(|o| o.value)
    }

    /// Solution file contents. Timing is left out so that reruns produce
    /// identical files; see [`Solution::wall_ms`].
    pub fn to_json(&self, inst: &Instance) -> serde_json::Value {
        serde_json::json!({
            "status": self.status,
            "objective": self.objective,
            "objective_value": self.objective.as_ref().map(|o| ratio_to_f64(o.value)),
            "bound": self.bound.map(|b| b.to_string()),
            "assignment": self.assignment.as_ref().map(|p| p.to_map(inst)),
            "seed": self.seed,
            "nodes": self.nodes,
            "iterations": self.iterations,
        })
    }
}

/// Which optimizer to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    BruteForce,
    Exact,
    Ils,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::BruteForce => "brute-force",
            Backend::Exact => "exact",
            Backend::Ils => "ils",
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "brute-force" | "brute" => Ok(Backend::BruteForce),
            "exact" => Ok(Backend::Exact),
            "ils" => Ok(Backend::Ils),
            other => Err(format!(
                "unknown backend `{other}` (brute-force, exact, ils)"
            )),
        }
    }
}

/// A backend with its settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverChoice {
    pub backend: Backend,
    pub limits: SolveLimits,
    pub ils: IlsParams,
    pub seed: u64,
    /// Seed the exact search with an ILS incumbent.
    pub warm_start: bool,
}

impl SolverChoice {
    pub fn new(backend: Backend) -> Self {
        SolverChoice {
            backend,
            limits: SolveLimits::default(),
            ils: IlsParams::default(),
            seed: 0,
            warm_start: true,
        }
    }

    pub fn solve(&self, spec: &ModelSpec<'_>) -> Result<Solution, SolverError> {
        Ok(match self.backend {
            Backend::BruteForce => solve_brute_force(spec)?,
            Backend::Exact if self.warm_start => {
                let warm = solve_ils(spec, self.seed, self.ils).assignment;
                let options = ExactOptions {
                    warm_start: warm,
                    ..Default::default()
                };
                solve_exact_with(spec, self.limits, &options)
            }
            Backend::Exact => solve_exact(spec, self.limits),
            Backend::Ils => solve_ils(spec, self.seed, self.ils),
        })
    }
}

pub(crate) fn objective_of(spec: &ModelSpec<'_>, phi: &Assignment) -> ObjectiveValue {
    crate::models::evaluate(spec, phi)
        .expect("solver assignments respect candidate sets")
        .objective
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::CandidateSets;
    use crate::fixtures;
    use crate::models::{build_stage1, build_stage2_efficient};

    #[test]
    fn solution_json_shape() {
        let t1 = fixtures::t1();
        let spec = build_stage1(&t1, CandidateSets::full(&t1)).unwrap();
        let sol = solve_brute_force(&spec).unwrap();
        let v = sol.to_json(&t1);
        assert_eq!(v["status"], "optimal");
        assert_eq!(v["objective"]["value"], "0");
        assert_eq!(v["assignment"]["a1"], "r1");
        let spec = build_stage2_efficient(&t1, CandidateSets::full(&t1), -1).unwrap();
        let v = solve_brute_force(&spec).unwrap().to_json(&t1);
        assert_eq!(v["status"], "infeasible");
        assert!(v["assignment"].is_null());
    }
}
