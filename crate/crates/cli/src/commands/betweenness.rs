//! `betweenness`: B(a) per arc, its classes and κ.

use anyhow::Result;
use resub_core::betweenness::{write_report_csv, ArcClass};

use super::{compute_kappa, kappa_record, read_instance, Outcome};
use crate::args::BetweennessArgs;
use crate::run::RunContext;

pub fn run(a: &BetweennessArgs, ctx: &mut RunContext) -> Result<Outcome> {
    let inst = read_instance(&a.instance)?;
    let (report, kappa) = compute_kappa(&inst, &a.kappa, a.seed)?;
    ctx.write_csv("betweenness.csv", |buf| {
        Ok(write_report_csv(buf, &report, &kappa)?)
    })?;
    ctx.write_json("kappa.json", kappa_record(&inst, &report, &kappa))?;

    let count = |c: ArcClass| kappa.class.iter().filter(|&&x| x == c).count();
    let mut out = Outcome::default();
    out.line("arcs", inst.num_arcs());
    out.line("tau1", format!("{:.4}", kappa.thresholds.0));
    out.line("tau2", format!("{:.4}", kappa.thresholds.1));
    out.line(
        "low/medium/high",
        format!(
            "{}/{}/{}",
            count(ArcClass::Low),
            count(ArcClass::Medium),
            count(ArcClass::High)
        ),
    );
    out.line("mean kappa", format!("{:.3}", kappa.mean_kappa()));
    Ok(out)
}
