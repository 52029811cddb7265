//! `solve`: one model on one instance.

use std::time::Instant;

use anyhow::{Context, Result};
use resub_core::models::{render_ratio, ModelSpec};
use resub_core::portfolio::Analytics;
use resub_core::solver::Solution;
use serde_json::Value;

use super::{
    initial_imbalance, millis, model_kind, read_candidates, read_instance, require_cap, solve,
    solver_choice, stage1_record, write_timings, Outcome,
};
use crate::args::SolveArgs;
use crate::run::RunContext;

/// Solution file contents for a Stage 2 model.
pub fn stage2_record(spec: &ModelSpec<'_>, sol: &Solution) -> Result<Value> {
    let inst = spec.instance();
    let mut v = sol.to_json(inst);
    let obj = v.as_object_mut().expect("solution JSON is an object");
    obj.insert("model".into(), spec.kind().tag().as_str().into());
    obj.insert(
        "weight".into(),
        spec.kind().weight().map(|w| w.to_string()).into(),
    );
    obj.insert("istar".into(), spec.istar().into());
    obj.insert("initial_imbalance".into(), initial_imbalance(inst).into());
    obj.insert("instance_fingerprint".into(), inst.fingerprint().into());
    obj.insert(
        "candidate_fingerprint".into(),
        spec.candidates().fingerprint(inst).into(),
    );
    let analytics = match &sol.assignment {
        Some(phi) => Some(Analytics::of(inst, phi).context("portfolio")?),
        None => None,
    };
    obj.insert("analytics".into(), serde_json::to_value(analytics)?);
    Ok(v)
}

pub fn run(a: &SolveArgs, ctx: &mut RunContext) -> Result<Outcome> {
    let inst = read_instance(&a.instance)?;
    let cands = read_candidates(&inst, a.candidates.as_deref())?;
    let kind = model_kind(a.model, a.weight)?;
    let istar = if kind.is_stage2() {
        Some(require_cap(&inst, &cands, &a.cap)?)
    } else {
        None
    };
    let spec = ModelSpec::new(&inst, cands.clone(), kind, istar).context("models")?;
    let choice = solver_choice(&a.solver);
    let start = Instant::now();
    let sol = solve(&choice, &spec)?;
    let ms = millis(start);

    let tag = kind.tag().as_str();
    let name = a.output.clone().unwrap_or_else(|| format!("{tag}.json"));
    let record = if kind.is_stage2() {
        stage2_record(&spec, &sol)?
    } else {
        stage1_record(&inst, &cands, &sol)
    };
    ctx.write_json(&name, record)?;
    write_timings(ctx, "solve_timings.csv", &[(tag.to_string(), ms)])?;

    let mut out = Outcome::default();
    out.track(tag, &sol);
    out.line("model", tag);
    out.line("status", sol.status.as_str());
    out.line("initial imbalance", initial_imbalance(&inst));
    if let Some(cap) = istar {
        out.line("imbalance cap", cap);
    }
    if let Some(o) = &sol.objective {
        out.line("objective", render_ratio(o.value));
        out.line("imbalance", o.imbalance);
        out.line("changes", o.changes);
        out.line("max burden", o.max_burden);
        out.line("burdens", format!("{:?}", o.burdens));
    }
    if let Some(b) = sol.bound {
        out.line("bound", render_ratio(b));
    }
    out.line("nodes", sol.nodes);
    Ok(out)
}
