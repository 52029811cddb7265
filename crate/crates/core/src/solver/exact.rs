//! Depth-first branch-and-bound.
//!
//! Arcs are branched in order of descending candidate count, then arc index.
//! Unassigned arcs are held at their initial resource in a shadow
//! [`EvalState`], which yields the imbalance "if nothing else changes" and the
//! committed burdens in O(1) per step.
//!
//! Stage 1 bound, per node n: let f_r be the net inflow of resource r over
//! fixed arcs, F = Σ_r f_r, and u_in/u_out the unassigned non-loop incident
//! arcs. Then Σ_r |final_r| ≥ max(Σ_r |f_r| − u, |F + u_in − u_out|), and its
//! parity equals that of F + u_in − u_out.
//!
//! Stage 2 bound: one further change moves the imbalance by at most 4, so
//! reaching the cap from the shadow imbalance I_keep needs at least
//! ⌈(I_keep − I*)/4⌉ changes among unassigned arcs. Those changes are spread
//! over schedulers within their remaining capacity for the Z bound; the
//! pairwise term uses interval distances between reachable burden ranges.

use std::time::Instant;

use num_rational::Rational64;

use super::{objective_of, Solution, SolveLimits, Status, TracePoint};
use crate::models::{EvalState, ModelKind, ModelSpec};
use crate::network::Assignment;

#[derive(Debug, Clone, Default)]
pub struct ExactOptions {
    /// Child ordering scores per arc, indexed by resource; higher first.
    pub priorities: Option<Vec<Vec<f64>>>,
    /// Starting incumbent, used only if it satisfies the cap.
    pub warm_start: Option<Assignment>,
}

struct Bounds<'s, 'a> {
    spec: &'s ModelSpec<'a>,
    nr: usize,
    shadow: EvalState<'a>,
    f: Vec<i64>,
    abs_f: Vec<i64>,
    sum_f: Vec<i64>,
    u_in: Vec<i64>,
    u_out: Vec<i64>,
    node_lb: Vec<i64>,
    lb1: i64,
    /// Unassigned arcs per owner that could still change.
    free: Vec<i64>,
    assigned: Vec<bool>,
}

impl<'s, 'a> Bounds<'s, 'a> {
    fn new(spec: &'s ModelSpec<'a>) -> Self {
        let inst = spec.instance();
        let nn = inst.num_nodes();
        let mut b = Bounds {
            spec,
            nr: inst.num_resources(),
            shadow: EvalState::new(inst, &Assignment::initial(inst)),
            f: vec![0; nn * inst.num_resources()],
            abs_f: vec![0; nn],
            sum_f: vec![0; nn],
            u_in: vec![0; nn],
            u_out: vec![0; nn],
            node_lb: vec![0; nn],
            lb1: 0,
            free: vec![0; inst.num_schedulers()],
            assigned: vec![false; inst.num_arcs()],
        };
        for (a, arc) in inst.arcs().iter().enumerate() {
            if !arc.is_self_loop() {
                b.u_in[arc.to] += 1;
                b.u_out[arc.from] += 1;
            }
            if spec.candidates().get(a).len() > 1 {
                b.free[inst.arc_owner(a)] += 1;
            }
        }
        for n in 0..nn {
            b.node_lb[n] = b.node_bound(n);
            b.lb1 += b.node_lb[n];
        }
        b
    }

    fn node_bound(&self, n: usize) -> i64 {
        let u = self.u_in[n] + self.u_out[n];
        let total = self.sum_f[n] + self.u_in[n] - self.u_out[n];
        let mut l = (self.abs_f[n] - u).max(total.abs());
        if (l - total).rem_euclid(2) != 0 {
            l += 1;
        }
        l
    }

    fn refresh(&mut self, n: usize) {
        let l = self.node_bound(n);
        self.lb1 += l - self.node_lb[n];
        self.node_lb[n] = l;
    }

    fn bump(&mut self, n: usize, r: usize, step: i64) {
        let cell = &mut self.f[n * self.nr + r];
        self.abs_f[n] -= cell.abs();
        *cell += step;
        self.abs_f[n] += cell.abs();
        self.sum_f[n] += step;
    }

    fn assign(&mut self, a: usize, r: usize) {
        let arc = self.spec.instance().arc(a);
        if !arc.is_self_loop() {
            let (from, to) = (arc.from, arc.to);
            self.bump(to, r, 1);
            self.bump(from, r, -1);
            self.u_in[to] -= 1;
            self.u_out[from] -= 1;
            self.refresh(to);
            self.refresh(from);
        }
        if self.spec.candidates().get(a).len() > 1 {
            self.free[self.spec.instance().arc_owner(a)] -= 1;
        }
        self.shadow.apply(a, r);
        self.assigned[a] = true;
    }

    fn unassign(&mut self, a: usize, r: usize) {
        let arc = self.spec.instance().arc(a);
        if !arc.is_self_loop() {
            let (from, to) = (arc.from, arc.to);
            self.bump(to, r, -1);
            self.bump(from, r, 1);
            self.u_in[to] += 1;
            self.u_out[from] += 1;
            self.refresh(to);
            self.refresh(from);
        }
        if self.spec.candidates().get(a).len() > 1 {
            self.free[self.spec.instance().arc_owner(a)] += 1;
        }
        self.shadow.apply(a, arc.initial);
        self.assigned[a] = false;
    }

    /// Scaled lower bound over all completions; `None` if none can be
    /// feasible.
    fn bound(&self) -> Option<i64> {
        let spec = self.spec;
        let Some(cap) = spec.istar() else {
            return Some(self.lb1);
        };
        if self.lb1 > cap {
            return None;
        }
        let need = (self.shadow.imbalance() - cap).max(0);
        let need = (need + 3) / 4;
        if need > self.free.iter().sum::<i64>() {
            return None;
        }
        let committed = self.shadow.burdens();
        let delta_lb = self.shadow.changes() + need;
        let (keep, w) = spec.scaled_weights();
        let z_lb = || {
            let mut z = committed.iter().copied().max().unwrap_or(0);
            loop {
                let room: i64 = committed
                    .iter()
                    .zip(&self.free)
                    .map(|(&b, &u)| (z - b).clamp(0, u))
                    .sum();
                if room >= need {
                    return z;
                }
                z += 1;
            }
        };
        let pair_lb = || {
            let mut total = 0;
            for i in 0..committed.len() {
                for j in i + 1..committed.len() {
                    let (lo_i, hi_i) = (committed[i], committed[i] + self.free[i]);
                    let (lo_j, hi_j) = (committed[j], committed[j] + self.free[j]);
                    total += (lo_i - hi_j).max(lo_j - hi_i).max(0);
                }
            }
            total
        };
        Some(match spec.kind() {
            ModelKind::Stage1 => unreachable!("stage 1 has no cap"),
            ModelKind::Stage2Efficient => delta_lb,
            ModelKind::Stage2Minimax => z_lb(),
            ModelKind::Stage2Weighted { .. } => keep * delta_lb + w * z_lb(),
            ModelKind::Stage2Gini { .. } => keep * delta_lb + w * pair_lb(),
        })
    }
}

/// The solver's bound for the subtree where the arcs with `Some` entries are
/// fixed. Exposed so bound admissibility can be checked from outside.
pub fn node_lower_bound(spec: &ModelSpec<'_>, partial: &[Option<usize>]) -> Option<i64> {
    let mut b = Bounds::new(spec);
    for (a, r) in partial.iter().enumerate() {
        if let Some(r) = *r {
            b.assign(a, r);
        }
    }
    b.bound()
}

struct Search<'s, 'a> {
    bounds: Bounds<'s, 'a>,
    order: Vec<usize>,
    children: Vec<Vec<usize>>,
    incumbent: Option<(i64, Vec<usize>)>,
    gap: i64,
    nodes: u64,
    limits: SolveLimits,
    started: Instant,
    stopped: bool,
    open: Vec<i64>,
    best_bound: i64,
    trace: Vec<TracePoint>,
}

impl Search<'_, '_> {
    fn global_bound(&self) -> i64 {
        let frontier = self.open.iter().copied().min();
        let inc = self.incumbent.as_ref().map(|(v, _)| *v);
        let lb = match (frontier, inc) {
            (Some(f), Some(i)) => f.min(i),
            (Some(f), None) => f,
            (None, Some(i)) => i,
            (None, None) => self.best_bound,
        };
        lb.max(self.best_bound)
    }

    fn out_of_budget(&mut self) -> bool {
        if let Some(limit) = self.limits.nodes {
            if self.nodes >= limit {
                return true;
            }
        }
        if let Some(t) = self.limits.time {
            if self.nodes.is_multiple_of(1024) && self.started.elapsed() >= t {
                return true;
            }
        }
        false
    }

    fn dfs(&mut self, depth: usize) {
        if depth == self.order.len() {
            let c = self.bounds.shadow.components();
            let spec = self.bounds.spec;
            if spec.is_feasible(&c) {
                let v = spec.scaled_objective(&c);
                if self.incumbent.as_ref().is_none_or(|(b, _)| v < *b) {
                    let phi = (0..self.bounds.assigned.len())
                        .map(|a| self.bounds.shadow.resource(a))
                        .collect();
                    self.incumbent = Some((v, phi));
                    self.best_bound = self.global_bound();
                    self.trace.push(TracePoint {
                        nodes: self.nodes,
                        objective: v,
                        bound: self.best_bound,
                    });
                }
            }
            return;
        }
        let a = self.order[depth];
        for k in 0..self.children[a].len() {
            let r = self.children[a][k];
            if self.out_of_budget() {
                self.stopped = true;
                return;
            }
            self.nodes += 1;
            self.bounds.assign(a, r);
            if let Some(lb) = self.bounds.bound() {
                let promising = self
                    .incumbent
                    .as_ref()
                    .is_none_or(|(inc, _)| lb + self.gap < *inc);
                if promising {
                    self.open.push(lb);
                    self.dfs(depth + 1);
                    self.open.pop();
                }
            }
            self.bounds.unassign(a, r);
            if self.stopped {
                return;
            }
        }
    }
}

pub fn solve_exact(spec: &ModelSpec<'_>, limits: SolveLimits) -> Solution {
    solve_exact_with(spec, limits, &ExactOptions::default())
}

pub fn solve_exact_with(
    spec: &ModelSpec<'_>,
    limits: SolveLimits,
    options: &ExactOptions,
) -> Solution {
    let started = Instant::now();
    let inst = spec.instance();
    let cands = spec.candidates();
    let mut order: Vec<usize> = (0..inst.num_arcs()).collect();
    order.sort_by_key(|&a| (std::cmp::Reverse(cands.get(a).len()), a));
    let children: Vec<Vec<usize>> = (0..inst.num_arcs())
        .map(|a| {
            let mut c = cands.get(a).to_vec();
            if let Some(p) = &options.priorities {
                c.sort_by(|&x, &y| p[a][y].total_cmp(&p[a][x]).then(x.cmp(&y)));
            }
            c
        })
        .collect();
    let bounds = Bounds::new(spec);
    let root = bounds.bound();
    let denom = spec.denominator();
    let gap = (limits.gap * Rational64::from_integer(denom))
        .floor()
        .to_integer();

    let Some(root_lb) = root else {
        return Solution::infeasible(0, started.elapsed().as_millis() as u64);
    };
    let mut search = Search {
        bounds,
        order,
        children,
        incumbent: None,
        gap,
        nodes: 0,
        limits,
        started,
        stopped: false,
        open: vec![root_lb],
        best_bound: root_lb,
        trace: Vec::new(),
    };
    if let Some(ws) = &options.warm_start {
        if spec.check_candidates(ws).is_ok() {
            let st = EvalState::new(inst, ws);
            let c = st.components();
            if spec.is_feasible(&c) {
                let v = spec.scaled_objective(&c);
                search.incumbent = Some((v, ws.as_slice().to_vec()));
                search.trace.push(TracePoint {
                    nodes: 0,
                    objective: v,
                    bound: root_lb,
                });
            }
        }
    }
    let warm_prunes_root = search
        .incumbent
        .as_ref()
        .is_some_and(|(inc, _)| root_lb + gap >= *inc);
    if !warm_prunes_root {
        search.dfs(0);
    }
    search.open.clear();
    let wall_ms = started.elapsed().as_millis() as u64;
    let nodes = search.nodes;
    let stopped = search.stopped;
    let bound = if stopped {
        // open frames were unwound; the running maximum is still valid
        search.best_bound
    } else {
        match &search.incumbent {
            Some((v, _)) => (*v - gap).max(search.best_bound).min(*v),
            None => search.best_bound,
        }
    };
    let trace = search.trace;
    match search.incumbent {
        None if !stopped => Solution::infeasible(nodes, wall_ms),
        None => Solution {
            status: Status::LimitReached,
            assignment: None,
            objective: None,
            bound: Some(Rational64::new(bound, denom)),
            nodes,
            iterations: 0,
            wall_ms,
            seed: None,
            trace,
        },
        Some((v, phi)) => {
            let phi = Assignment::new(phi);
            let status = if stopped {
                Status::LimitReached
            } else if bound == v {
                Status::Optimal
            } else {
                Status::Feasible
            };
            Solution {
                status,
                objective: Some(objective_of(spec, &phi)),
                assignment: Some(phi),
                bound: Some(Rational64::new(bound, denom)),
                nodes,
                iterations: 0,
                wall_ms,
                seed: None,
                trace,
            }
        }
    }
}
