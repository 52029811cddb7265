//! Solution portfolios: weight sweeps, Pareto filtering on (Δ, Z), and
//! per-solution fairness analytics.

use std::collections::BTreeSet;
use std::io::Write;

use num_rational::Rational64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::candidates::CandidateSets;
use crate::models::{
    build_stage2_gini, build_stage2_weighted, render_ratio, EvalState, ModelError, ModelKind,
    ModelKindTag, ModelSpec, Weight,
};
use crate::network::{burdens, Assignment, AssignmentError, BurdenVector, Instance};
use crate::solver::{Solution, SolverChoice, SolverError, Status};

#[derive(Debug, Error)]
pub enum PortfolioError {
    #[error("weight {0} appears more than once in the sweep")]
    DuplicateWeight(Weight),
    #[error("label `{0}` is already in the portfolio")]
    DuplicateLabel(String),
    #[error("levels must be sorted ascending")]
    Levels,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error("report output: {0}")]
    Csv(#[from] csv::Error),
}

/// Changed arcs split into those inside one scheduler's nodes and those
/// crossing a scheduler boundary.
pub fn classify_substitutions(
    inst: &Instance,
    phi: &Assignment,
) -> Result<(i64, i64), AssignmentError> {
    phi.validate(inst)?;
    let (mut internal, mut collaborative) = (0, 0);
    for a in phi.changed_arcs(inst) {
        if inst.is_internal(a) {
            internal += 1;
        } else {
            collaborative += 1;
        }
    }
    Ok((internal, collaborative))
}

/// Σ over ordered scheduler pairs of |B_i − B_j|, divided by 2·|S|·ΣB;
/// zero when nothing changed.
pub fn gini_coefficient(b: &BurdenVector) -> f64 {
    let n = b.per_scheduler.len() as i64;
    if b.total_changes == 0 || n == 0 {
        return 0.0;
    }
    // ordered-pair sum is twice the unordered one
    let r = Rational64::new(2 * b.pairwise_spread(), 2 * n * b.total_changes);
    *r.numer() as f64 / *r.denom() as f64
}

/// Shares B_s / Δ; all zero when Δ = 0.
pub fn burden_shares(b: &BurdenVector) -> Vec<Rational64> {
    b.per_scheduler
        .iter()
        .map(|&x| {
            if b.total_changes == 0 {
                Rational64::from_integer(0)
            } else {
                Rational64::new(x, b.total_changes)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analytics {
    pub imbalance: i64,
    pub changes: i64,
    pub max_burden: i64,
    pub pairwise: i64,
    pub burdens: Vec<i64>,
    pub shares: Vec<f64>,
    pub gini: f64,
    pub internal: i64,
    pub collaborative: i64,
}

impl Analytics {
    pub fn of(inst: &Instance, phi: &Assignment) -> Result<Self, AssignmentError> {
        let b = burdens(inst, phi)?;
        let (internal, collaborative) = classify_substitutions(inst, phi)?;
        let report = crate::network::total_imbalance(inst, phi)?;
        Ok(Analytics {
            imbalance: report.total,
            changes: b.total_changes,
            max_burden: b.max_burden,
            pairwise: b.pairwise_spread(),
            shares: burden_shares(&b)
                .into_iter()
                .map(crate::models::ratio_to_f64)
                .collect(),
            gini: gini_coefficient(&b),
            burdens: b.per_scheduler,
            internal,
            collaborative,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub label: String,
    pub kind: ModelKindTag,
    pub weight: Option<Weight>,
    pub solution: Solution,
    /// `None` when the solver returned no assignment.
    pub analytics: Option<Analytics>,
    pub on_front: bool,
}

impl Entry {
    /// Proven optimal with an assignment; only these enter dominance checks.
    pub fn is_proven(&self) -> bool {
        self.solution.status == Status::Optimal && self.analytics.is_some()
    }

    pub fn coordinates(&self) -> Option<(i64, i64)> {
        self.analytics.as_ref().map(|a| (a.changes, a.max_burden))
    }
}

/// Labelled Stage 2 solutions of one instance under one imbalance cap.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    pub schedulers: Vec<String>,
    pub istar: i64,
    entries: Vec<Entry>,
}

impl Portfolio {
    pub fn new(inst: &Instance, istar: i64) -> Self {
        Portfolio {
            schedulers: inst.schedulers().iter().map(|s| s.id.clone()).collect(),
            istar,
            entries: Vec::new(),
        }
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.label == label)
    }

    /// Entries on the Pareto front, in insertion order.
    pub fn front(&self) -> Vec<&Entry> {
        self.entries.iter().filter(|e| e.on_front).collect()
    }

    pub fn push(
        &mut self,
        inst: &Instance,
        label: impl Into<String>,
        kind: ModelKind,
        solution: Solution,
    ) -> Result<(), PortfolioError> {
        let label = label.into();
        if self.get(&label).is_some() {
            return Err(PortfolioError::DuplicateLabel(label));
        }
        let analytics = match &solution.assignment {
            Some(phi) => Some(Analytics::of(inst, phi)?),
            None => None,
        };
        self.entries.push(Entry {
            label,
            kind: kind.tag(),
            weight: kind.weight(),
            solution,
            analytics,
            on_front: false,
        });
        self.refresh_front();
        Ok(())
    }

    /// Merge another portfolio's entries (same instance and cap).
    pub fn extend(&mut self, other: Portfolio) -> Result<(), PortfolioError> {
        for e in other.entries {
            if self.get(&e.label).is_some() {
                return Err(PortfolioError::DuplicateLabel(e.label));
            }
            self.entries.push(e);
        }
        self.refresh_front();
        Ok(())
    }

    /// A proven entry is on the front unless another proven entry is at
    /// least as good in both Δ and Z and better in one; among entries with
    /// equal coordinates only the earliest is kept.
    fn refresh_front(&mut self) {
        let coords: Vec<Option<(i64, i64)>> = self
            .entries
            .iter()
            .map(|e| if e.is_proven() { e.coordinates() } else { None })
            .collect();
        for i in 0..self.entries.len() {
            self.entries[i].on_front = match coords[i] {
                None => false,
                Some((d, z)) => !coords.iter().enumerate().any(|(j, c)| match *c {
                    Some((dj, zj)) if j != i => {
                        (dj <= d && zj <= z && (dj < d || zj < z)) || (dj == d && zj == z && j < i)
                    }
                    _ => false,
                }),
            };
        }
    }

    pub fn to_json(&self, inst: &Instance) -> serde_json::Value {
        let entries: Vec<serde_json::Value> = self
            .entries
            .iter()
            .map(|e| {
                let mut v = e.solution.to_json(inst);
                let obj = v.as_object_mut().expect("solution JSON is an object");
                obj.insert("label".into(), e.label.clone().into());
                obj.insert("model".into(), e.kind.as_str().into());
                obj.insert("weight".into(), e.weight.map(|w| w.to_string()).into());
                obj.insert("on_front".into(), e.on_front.into());
                obj.insert(
                    "analytics".into(),
                    serde_json::to_value(&e.analytics).expect("analytics serialize"),
                );
                v
            })
            .collect();
        serde_json::json!({
            "istar": self.istar,
            "schedulers": self.schedulers,
            "entries": entries,
            "front": self.front().iter().map(|e| e.label.clone()).collect::<Vec<_>>(),
        })
    }
}

fn check_distinct(weights: &[Weight]) -> Result<(), PortfolioError> {
    let mut seen = BTreeSet::new();
    for w in weights {
        if !seen.insert(w.ratio()) {
            return Err(PortfolioError::DuplicateWeight(*w));
        }
    }
    Ok(())
}

fn sweep<'a, F>(
    inst: &'a Instance,
    istar: i64,
    weights: &[Weight],
    choice: &SolverChoice,
    prefix: &str,
    build: F,
) -> Result<Portfolio, PortfolioError>
where
    F: Fn(Weight) -> Result<ModelSpec<'a>, ModelError> + Sync,
{
    check_distinct(weights)?;
    let solved: Vec<Result<(ModelKind, Solution), PortfolioError>> = weights
        .par_iter()
        .map(|&w| {
            let spec = build(w)?;
            Ok((spec.kind(), choice.solve(&spec)?))
        })
        .collect();
    let mut p = Portfolio::new(inst, istar);
    for (w, r) in weights.iter().zip(solved) {
        let (kind, sol) = r?;
        p.push(inst, format!("{prefix}={w}"), kind, sol)?;
    }
    Ok(p)
}

/// One weighted-model solve per α, labelled `alpha=<α>`.
pub fn sweep_alpha(
    inst: &Instance,
    candidates: &CandidateSets,
    istar: i64,
    alphas: &[Weight],
    choice: &SolverChoice,
) -> Result<Portfolio, PortfolioError> {
    sweep(inst, istar, alphas, choice, "alpha", |a| {
        build_stage2_weighted(inst, candidates.clone(), istar, a)
    })
}

/// One Gini-model solve per ω, labelled `omega=<ω>`.
pub fn sweep_omega(
    inst: &Instance,
    candidates: &CandidateSets,
    istar: i64,
    omegas: &[Weight],
    choice: &SolverChoice,
) -> Result<Portfolio, PortfolioError> {
    sweep(inst, istar, omegas, choice, "omega", |w| {
        build_stage2_gini(inst, candidates.clone(), istar, w)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BurdenRow {
    pub label: String,
    pub shares: Vec<Rational64>,
}

/// Per entry with an assignment: each scheduler's share of the changes.
pub fn burden_distribution(p: &Portfolio) -> Vec<BurdenRow> {
    p.entries
        .iter()
        .filter_map(|e| {
            let a = e.analytics.as_ref()?;
            Some(BurdenRow {
                label: e.label.clone(),
                shares: burden_shares(&BurdenVector::from_counts(a.burdens.clone())),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CurvePoint {
    pub fraction: Weight,
    pub applied: usize,
    pub imbalance: i64,
}

/// Changed arcs of `phi_star` in greedy order: each step applies the
/// remaining change that lowers total imbalance the most (ties by arc id).
pub fn greedy_order(inst: &Instance, phi_star: &Assignment) -> Result<Vec<usize>, AssignmentError> {
    phi_star.validate(inst)?;
    let mut state = EvalState::new(inst, &Assignment::initial(inst));
    let mut remaining = phi_star.changed_arcs(inst);
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let (k, _) = remaining
            .iter()
            .enumerate()
            .map(|(k, &a)| (k, state.imbalance_delta(a, phi_star.get(a))))
            .min_by_key(|&(k, d)| (d, remaining[k]))
            .expect("nonempty");
        let a = remaining.remove(k);
        state.apply(a, phi_star.get(a));
        order.push(a);
    }
    Ok(order)
}

/// Total imbalance after applying the first ⌈f·Δ⌉ greedy changes, per level f.
pub fn partial_implementation_curve(
    inst: &Instance,
    phi_star: &Assignment,
    levels: &[Weight],
) -> Result<Vec<CurvePoint>, PortfolioError> {
    if levels.windows(2).any(|w| w[0] > w[1]) {
        return Err(PortfolioError::Levels);
    }
    let order = greedy_order(inst, phi_star)?;
    let delta = order.len() as i64;
    // imbalance after each prefix length
    let mut state = EvalState::new(inst, &Assignment::initial(inst));
    let mut prefix = vec![state.imbalance()];
    for &a in &order {
        state.apply(a, phi_star.get(a));
        prefix.push(state.imbalance());
    }
    Ok(levels
        .iter()
        .map(|&f| {
            let r = f.ratio() * delta;
            let applied = r.ceil().to_integer() as usize;
            CurvePoint {
                fraction: f,
                applied,
                imbalance: prefix[applied],
            }
        })
        .collect())
}

/// Efficiency-versus-fairness comparison for one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TradeoffRow {
    pub instance: String,
    pub schedulers: usize,
    pub i0: i64,
    pub istar: i64,
    pub delta_star: i64,
    pub z_star: i64,
    pub delta_fair: i64,
    pub z_fair: i64,
    pub delta_diff: i64,
    pub z_diff: i64,
}

impl TradeoffRow {
    /// From the portfolio's efficient and minimax entries, when both have
    /// assignments.
    pub fn from_portfolio(name: &str, i0: i64, p: &Portfolio) -> Option<Self> {
        let find = |kind| {
            p.entries
                .iter()
                .find(|e| e.kind == kind)
                .and_then(|e| e.analytics.as_ref())
        };
        let eff = find(ModelKindTag::Stage2Efficient)?;
        let fair = find(ModelKindTag::Stage2Minimax)?;
        Some(TradeoffRow {
            instance: name.to_string(),
            schedulers: p.schedulers.len(),
            i0,
            istar: p.istar,
            delta_star: eff.changes,
            z_star: eff.max_burden,
            delta_fair: fair.changes,
            z_fair: fair.max_burden,
            delta_diff: fair.changes - eff.changes,
            z_diff: fair.max_burden - eff.max_burden,
        })
    }
}

pub fn write_tradeoff_csv<W: Write>(rows: &[TradeoffRow], sink: W) -> Result<(), PortfolioError> {
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn percent_change(value: i64, base: i64) -> String {
    if base == 0 {
        render_ratio(Rational64::from_integer(0))
    } else {
        render_ratio(Rational64::new(100 * (value - base), base))
    }
}

/// Weighted entries as (α, Δ, Z, Δ%, Z%), percentages relative to the
/// efficient entry, or to the smallest α when there is none.
pub fn write_alpha_curve_csv<W: Write>(p: &Portfolio, sink: W) -> Result<(), PortfolioError> {
    let mut rows: Vec<(Weight, &Analytics)> = p
        .entries
        .iter()
        .filter(|e| e.kind == ModelKindTag::Stage2Weighted)
        .filter_map(|e| Some((e.weight?, e.analytics.as_ref()?)))
        .collect();
    rows.sort_by_key(|r| r.0);
    let base = p
        .entries
        .iter()
        .find(|e| e.kind == ModelKindTag::Stage2Efficient)
        .and_then(|e| e.analytics.as_ref())
        .or(rows.first().map(|r| r.1));
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["alpha", "delta", "z", "delta_pct", "z_pct"])?;
    for (alpha, a) in rows {
        let base = base.expect("rows imply a base");
        w.write_record([
            alpha.to_string(),
            a.changes.to_string(),
            a.max_burden.to_string(),
            percent_change(a.changes, base.changes),
            percent_change(a.max_burden, base.max_burden),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// One row per (plan, level).
pub fn write_curve_csv<W: Write>(
    curves: &[(String, Vec<CurvePoint>)],
    sink: W,
) -> Result<(), PortfolioError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["plan", "fraction", "applied", "imbalance"])?;
    for (plan, points) in curves {
        for pt in points {
            w.write_record([
                plan.clone(),
                render_ratio(pt.fraction.ratio()),
                pt.applied.to_string(),
                pt.imbalance.to_string(),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Burden shares with one column per scheduler.
pub fn write_shares_csv<W: Write>(p: &Portfolio, sink: W) -> Result<(), PortfolioError> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["label".to_string()];
    header.extend(p.schedulers.iter().cloned());
    header.extend(["gini".into(), "internal".into(), "collaborative".into()]);
    w.write_record(&header)?;
    for (row, e) in burden_distribution(p)
        .into_iter()
        .zip(p.entries.iter().filter(|e| e.analytics.is_some()))
    {
        let a = e.analytics.as_ref().expect("filtered");
        let mut rec = vec![row.label];
        rec.extend(row.shares.into_iter().map(render_ratio));
        rec.push(format!("{:.4}", a.gini));
        rec.push(a.internal.to_string());
        rec.push(a.collaborative.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
