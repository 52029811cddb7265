//! `sweep`: a grid of weighted or Gini models under one imbalance cap.

use anyhow::{Context, Result};
use resub_core::candidates::CandidateSets;
use resub_core::models::build_stage1;
use resub_core::network::Instance;
use resub_core::portfolio::{
    sweep_alpha, sweep_omega, write_alpha_curve_csv, write_shares_csv, Portfolio,
};
use resub_core::solver::SolverChoice;

use super::{
    read_candidates, read_cap, read_instance, solve, solver_choice, stage1_record, table, Outcome,
};
use crate::args::SweepArgs;
use crate::run::RunContext;

/// Stage 1 on `cands`, written to `stage1.json`; returns I*.
pub fn derive_cap(
    inst: &Instance,
    cands: &CandidateSets,
    choice: &SolverChoice,
    ctx: &mut RunContext,
    out: &mut Outcome,
    timings: &mut Vec<(String, f64)>,
) -> Result<i64> {
    let spec = build_stage1(inst, cands.clone()).context("models")?;
    let sol = solve(choice, &spec)?;
    out.track("stage1", &sol);
    timings.push(("stage1".into(), sol.wall_ms as f64));
    ctx.write_json("stage1.json", stage1_record(inst, cands, &sol))?;
    sol.objective
        .map(|o| o.imbalance)
        .context("stage 1 found no assignment")
}

/// Entry rows shared by `sweep` and `portfolio` summaries.
pub fn entry_table(p: &Portfolio) -> String {
    let rows: Vec<Vec<String>> = p
        .entries()
        .iter()
        .map(|e| {
            let a = e.analytics.as_ref();
            let get = |f: fn(&resub_core::portfolio::Analytics) -> String| {
                a.map(f).unwrap_or_else(|| "-".into())
            };
            vec![
                e.label.clone(),
                e.solution.status.as_str().into(),
                get(|a| a.changes.to_string()),
                get(|a| a.max_burden.to_string()),
                get(|a| a.pairwise.to_string()),
                get(|a| format!("{:.4}", a.gini)),
                if e.on_front { "yes" } else { "" }.into(),
            ]
        })
        .collect();
    table(
        &["label", "status", "delta", "z", "pairwise", "gini", "front"],
        &rows,
    )
}

pub fn run(a: &SweepArgs, ctx: &mut RunContext) -> Result<Outcome> {
    let inst = read_instance(&a.instance)?;
    let cands = read_candidates(&inst, a.candidates.as_deref())?;
    let choice = solver_choice(&a.solver);
    let mut out = Outcome::default();
    let mut timings = Vec::new();
    let istar = match read_cap(&inst, &cands, &a.cap)? {
        Some(i) => i,
        None => derive_cap(&inst, &cands, &choice, ctx, &mut out, &mut timings)?,
    };
    let p = match (&a.alphas, &a.omegas) {
        (Some(alphas), _) => sweep_alpha(&inst, &cands, istar, alphas, &choice),
        (None, Some(omegas)) => sweep_omega(&inst, &cands, istar, omegas, &choice),
        (None, None) => unreachable!("clap requires one grid"),
    }
    .context("portfolio")?;
    for e in p.entries() {
        out.track(&e.label, &e.solution);
        timings.push((e.label.clone(), e.solution.wall_ms as f64));
    }
    ctx.write_json("sweep.json", p.to_json(&inst))?;
    if a.alphas.is_some() {
        ctx.write_csv("alpha_curve.csv", |buf| Ok(write_alpha_curve_csv(&p, buf)?))?;
    }
    ctx.write_csv("shares.csv", |buf| Ok(write_shares_csv(&p, buf)?))?;
    super::write_timings(ctx, "sweep_timings.csv", &timings)?;

    out.line("imbalance cap", istar);
    out.line("entries", p.len());
    out.line("front", p.front().len());
    out.table = Some(entry_table(&p));
    Ok(out)
}
