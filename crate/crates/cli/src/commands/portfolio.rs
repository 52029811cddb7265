//! `portfolio`: the full pipeline on one instance.

use anyhow::{Context, Result};
use resub_core::candidates::CandidateFile;
use resub_core::models::{build_stage2_efficient, build_stage2_minimax, ModelSpec};
use resub_core::network::{total_imbalance, Assignment};
use resub_core::portfolio::{
    partial_implementation_curve, sweep_alpha, sweep_omega, write_alpha_curve_csv, write_curve_csv,
    write_shares_csv, write_tradeoff_csv, Portfolio, TradeoffRow,
};

use super::sweep::{derive_cap, entry_table};
use super::{
    filter_candidates, read_candidates, read_instance, solve, solver_choice, stem, write_timings,
    Outcome,
};
use crate::args::PortfolioArgs;
use crate::run::RunContext;

pub fn run(a: &PortfolioArgs, ctx: &mut RunContext) -> Result<Outcome> {
    let inst = read_instance(&a.instance)?;
    let cands = match filter_candidates(&inst, &a.filter, a.solver.seed)? {
        Some(f) => {
            let file = CandidateFile::new(&inst, &f.sets, f.meta);
            ctx.write_json("candidates.json", serde_json::to_value(&file)?)?;
            f.sets
        }
        None => read_candidates(&inst, a.candidates.as_deref())?,
    };
    let choice = solver_choice(&a.solver);
    let mut out = Outcome::default();
    let mut timings = Vec::new();
    let istar = derive_cap(&inst, &cands, &choice, ctx, &mut out, &mut timings)?;

    let mut p = Portfolio::new(&inst, istar);
    let fixed: [(&str, ModelSpec<'_>); 2] = [
        (
            "efficient",
            build_stage2_efficient(&inst, cands.clone(), istar).context("models")?,
        ),
        (
            "minimax",
            build_stage2_minimax(&inst, cands.clone(), istar).context("models")?,
        ),
    ];
    for (label, spec) in fixed {
        let sol = solve(&choice, &spec)?;
        p.push(&inst, label, spec.kind(), sol)
            .context("portfolio")?;
    }
    if !a.alphas.is_empty() {
        let s = sweep_alpha(&inst, &cands, istar, &a.alphas, &choice).context("portfolio")?;
        p.extend(s).context("portfolio")?;
    }
    if !a.omegas.is_empty() {
        let s = sweep_omega(&inst, &cands, istar, &a.omegas, &choice).context("portfolio")?;
        p.extend(s).context("portfolio")?;
    }
    for e in p.entries() {
        out.track(&e.label, &e.solution);
        timings.push((e.label.clone(), e.solution.wall_ms as f64));
    }

    let mut curves = Vec::new();
    for e in p.entries() {
        if let Some(phi) = &e.solution.assignment {
            let c = partial_implementation_curve(&inst, phi, &a.levels).context("portfolio")?;
            curves.push((e.label.clone(), c));
        }
    }
    let i0 = total_imbalance(&inst, &Assignment::initial(&inst))
        .context("network")?
        .total;
    let tradeoff: Vec<TradeoffRow> = TradeoffRow::from_portfolio(&stem(&a.instance), i0, &p)
        .into_iter()
        .collect();

    let mut doc = p.to_json(&inst);
    let obj = doc.as_object_mut().expect("portfolio JSON is an object");
    obj.insert("instance_fingerprint".into(), inst.fingerprint().into());
    obj.insert(
        "candidate_fingerprint".into(),
        cands.fingerprint(&inst).into(),
    );
    obj.insert("i0".into(), i0.into());
    ctx.write_json("portfolio.json", doc)?;
    ctx.write_csv("tradeoff.csv", |buf| {
        Ok(write_tradeoff_csv(&tradeoff, buf)?)
    })?;
    ctx.write_csv("alpha_curve.csv", |buf| Ok(write_alpha_curve_csv(&p, buf)?))?;
    ctx.write_csv("shares.csv", |buf| Ok(write_shares_csv(&p, buf)?))?;
    ctx.write_csv("curves.csv", |buf| Ok(write_curve_csv(&curves, buf)?))?;
    write_timings(ctx, "timings.csv", &timings)?;

    out.line("initial imbalance", i0);
    out.line("imbalance cap", istar);
    out.line("candidate pairs", cands.total_pairs());
    out.line("entries", p.len());
    out.line("front", p.front().len());
    if let Some(t) = tradeoff.first() {
        out.line("delta*/z*", format!("{}/{}", t.delta_star, t.z_star));
        out.line(
            "delta fair/z fair",
            format!("{}/{}", t.delta_fair, t.z_fair),
        );
    }
    out.table = Some(entry_table(&p));
    Ok(out)
}
