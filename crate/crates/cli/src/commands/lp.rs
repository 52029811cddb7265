//! `export-lp`: the model in LP format, for external MILP solvers.

use anyhow::{Context, Result};
use resub_core::models::{export_lp, ModelSpec};

use super::{model_kind, read_candidates, read_instance, require_cap, Outcome};
use crate::args::ExportLpArgs;
use crate::run::RunContext;

pub fn run(a: &ExportLpArgs, ctx: &mut RunContext) -> Result<Outcome> {
    let inst = read_instance(&a.instance)?;
    let cands = read_candidates(&inst, a.candidates.as_deref())?;
    let kind = model_kind(a.model, a.weight)?;
    let istar = if kind.is_stage2() {
        Some(require_cap(&inst, &cands, &a.cap)?)
    } else {
        None
    };
    let spec = ModelSpec::new(&inst, cands, kind, istar).context("models")?;
    let lp = export_lp(&spec);
    let tag = kind.tag().as_str();
    let name = a.output.clone().unwrap_or_else(|| format!("{tag}.lp"));
    ctx.write_lp(&name, &lp.text)?;
    ctx.write_json(
        "lp_summary.json",
        serde_json::json!({ "file": name, "model": spec.summary(), "lp": lp.summary }),
    )?;

    let mut out = Outcome::default();
    out.line("model", tag);
    out.line("binaries", lp.summary.binaries);
    out.line("continuous", lp.summary.continuous);
    out.line("constraints", lp.summary.constraints);
    Ok(out)
}
