//! `train`: fit the scorer on a reference pool and compare it with the
//! frequency baseline.

use std::collections::BTreeMap;
use std::fs;
use std::time::Instant;

use anyhow::{Context, Result};
use resub_core::network::{Assignment, Instance};
use resub_core::scorer::{
    build_training_set_with, top_kappa_table, train_scorer, FrequencyBaseline, Predictor, Split,
    TrainingConfig,
};

use super::{millis, read_instance, read_json, table, write_timings, Outcome};
use crate::args::TrainArgs;
use crate::run::RunContext;

/// Instances and reference assignments listed in a pool's `pool.json`.
fn read_pool(a: &TrainArgs) -> Result<Vec<(Instance, Assignment)>> {
    let index = read_json(&a.pool.join("pool.json"), "pool index")?;
    let rows = index["references"]
        .as_array()
        .context("pool index has no `references` list")?;
    let mut instances: BTreeMap<String, Instance> = BTreeMap::new();
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let inst_file = row["instance"]
            .as_str()
            .context("pool row without `instance`")?;
        let ref_file = row["reference"]
            .as_str()
            .context("pool row without `reference`")?;
        if !instances.contains_key(inst_file) {
            instances.insert(inst_file.into(), read_instance(&a.pool.join(inst_file))?);
        }
        let inst = instances[inst_file].clone();
        let path = a.pool.join(ref_file);
        let v = read_json(&path, "reference")?;
        let map: BTreeMap<String, String> = serde_json::from_value(v["assignment"].clone())
            .with_context(|| format!("reference {} has no assignment map", path.display()))?;
        let phi = Assignment::from_map(&inst, &map)
            .with_context(|| format!("validating reference {}", path.display()))?;
        out.push((inst, phi));
    }
    Ok(out)
}

pub fn run(a: &TrainArgs, ctx: &mut RunContext) -> Result<Outcome> {
    let config = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading training config {}", path.display()))?;
            TrainingConfig::from_json_str(&text).context("scorer")?
        }
        None => TrainingConfig::default(),
    };
    let pool = read_pool(a)?;
    let ts = build_training_set_with(pool.iter().map(|(i, p)| (i, p)), a.seed, config.split)
        .context("scorer: building the training set")?;

    let start = Instant::now();
    let mut model = train_scorer(&ts, &config, a.seed).context("scorer: training")?;
    let train_ms = millis(start);
    model.run = ctx.provenance();
    ctx.write_raw_json("model.json", &model.to_json_pretty())?;

    let baseline = FrequencyBaseline::from_training_set(&ts, Split::Train);
    let kappas: Vec<usize> = match &a.kappas {
        Some(k) => k.clone(),
        None => (1..=ts.resources.len()).collect(),
    };
    let predictors: [(&str, &dyn Predictor); 2] = [("scorer", &model), ("baseline", &baseline)];
    let mut rows = Vec::new();
    for split in [Split::Validation, Split::Test] {
        for (name, p) in predictors {
            for (k, top) in top_kappa_table(p, &ts, split, &kappas).context("scorer")? {
                rows.push((split, name, k, top));
            }
        }
    }
    ctx.write_csv("train_report.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["split", "predictor", "kappa", "top"])?;
        for (split, name, k, top) in &rows {
            w.write_record([split.as_str(), name, &k.to_string(), &format!("{top:.6}")])?;
        }
        w.flush()?;
        Ok(())
    })?;
    let meta = model.meta();
    ctx.write_csv("training_history.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["epoch", "train_loss", "validation_loss", "validation_top"])?;
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
        for e in &meta.history {
            w.write_record([
                e.epoch.to_string(),
                format!("{:.6}", e.train_loss),
                opt(e.validation_loss),
                opt(e.validation_top),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    write_timings(ctx, "train_timings.csv", &[("train".into(), train_ms)])?;

    let mut out = Outcome::default();
    out.line("resources", ts.resources.len());
    out.line(
        "examples train/validation/test",
        format!(
            "{}/{}/{}",
            ts.count(Split::Train),
            ts.count(Split::Validation),
            ts.count(Split::Test)
        ),
    );
    out.line("epochs", meta.epochs_run);
    out.line("stopped early", meta.stopped_early);
    let test: Vec<Vec<String>> = kappas
        .iter()
        .map(|&k| {
            let find = |name: &str| {
                rows.iter()
                    .find(|r| r.0 == Split::Test && r.1 == name && r.2 == k)
                    .map(|r| format!("{:.2}%", 100.0 * r.3))
                    .unwrap_or_default()
            };
            vec![k.to_string(), find("scorer"), find("baseline")]
        })
        .collect();
    out.table = Some(table(
        &["kappa", "test top (scorer)", "test top (baseline)"],
        &test,
    ));
    Ok(out)
}
