//! `score`: scorer-filtered candidate sets, and TOP_κ against a reference.

use std::collections::BTreeMap;

use anyhow::{Context, Result};
use resub_core::candidates::{CandidateFile, CandidateSets};
use resub_core::network::{Assignment, Instance};
use resub_core::scorer::{top_kappa_metric, Predictor, RawFeatures};

use super::{filter_candidates, load_scorer, read_instance, read_json, table, usage, Outcome};
use crate::args::ScoreArgs;
use crate::run::RunContext;

/// A bare arc → resource map, or an object holding one under `assignment`.
fn read_reference(inst: &Instance, path: &std::path::Path) -> Result<Assignment> {
    let v = read_json(path, "reference")?;
    let map_value = if v.get("assignment").is_some() {
        v["assignment"].clone()
    } else {
        v
    };
    let map: BTreeMap<String, String> = serde_json::from_value(map_value)
        .with_context(|| format!("reference {} is not an assignment map", path.display()))?;
    Assignment::from_map(inst, &map)
        .with_context(|| format!("validating reference {}", path.display()))
}

/// Predictions over the instance's resources, one row per arc.
fn predictions(inst: &Instance, p: &dyn Predictor) -> Vec<Vec<f64>> {
    let pos: Vec<Option<usize>> = inst
        .resources()
        .iter()
        .map(|r| p.resources().iter().position(|x| x == r))
        .collect();
    (0..inst.num_arcs())
        .map(|a| {
            let raw = p.predict(&RawFeatures::of_arc(inst, a));
            pos.iter().map(|m| m.map_or(0.0, |i| raw[i])).collect()
        })
        .collect()
}

pub fn run(a: &ScoreArgs, ctx: &mut RunContext) -> Result<Outcome> {
    let inst = read_instance(&a.instance)?;
    let Some(path) = &a.filter.scorer else {
        return Err(usage("score needs --scorer"));
    };
    let filtered = filter_candidates(&inst, &a.filter, a.seed)?.expect("scorer given");
    let file = CandidateFile::new(&inst, &filtered.sets, filtered.meta.clone());
    ctx.write_json("candidates.json", serde_json::to_value(&file)?)?;

    let full = CandidateSets::full(&inst).total_pairs();
    let kept = filtered.sets.total_pairs();
    let mut out = Outcome::default();
    out.line("arcs", inst.num_arcs());
    out.line("candidate pairs before", full);
    out.line("candidate pairs after", kept);
    out.line(
        "reduction",
        format!("{:.2}%", 100.0 * (full - kept) as f64 / full.max(1) as f64),
    );
    out.line("mean kappa", format!("{:.3}", filtered.kappa.mean_kappa()));

    if let Some(ref_path) = &a.reference {
        let phi = read_reference(&inst, ref_path)?;
        let model = load_scorer(path)?;
        let preds = predictions(&inst, &model);
        let labels: Vec<Vec<f64>> = (0..inst.num_arcs())
            .map(|arc| {
                let mut y = vec![0.0; inst.num_resources()];
                y[phi.get(arc)] = 1.0;
                y
            })
            .collect();
        let mut rows = Vec::new();
        for k in 1..=inst.num_resources() {
            rows.push((k, top_kappa_metric(&preds, &labels, k).context("scorer")?));
        }
        let covered = (0..inst.num_arcs())
            .filter(|&arc| filtered.sets.contains(arc, phi.get(arc)))
            .count();
        ctx.write_csv("top_kappa.csv", |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["kappa", "top"])?;
            for (k, top) in &rows {
                w.write_record([k.to_string(), format!("{top:.6}")])?;
            }
            w.flush()?;
            Ok(())
        })?;
        out.line(
            "reference covered by candidates",
            format!("{covered}/{}", inst.num_arcs()),
        );
        let body: Vec<Vec<String>> = rows
            .iter()
            .map(|(k, t)| vec![k.to_string(), format!("{:.2}%", 100.0 * t)])
            .collect();
        out.table = Some(table(&["kappa", "top"], &body));
    }
    Ok(out)
}
