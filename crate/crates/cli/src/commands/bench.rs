//! `bench`: Stage 1 plus efficient Stage 2 with and without scorer filtering.

use std::time::Instant;

use anyhow::{Context, Result};
use resub_core::candidates::CandidateSets;
use resub_core::models::{build_stage1, build_stage2_efficient};
use resub_core::network::Instance;
use resub_core::solver::{SolverChoice, Status};

use super::{
    filter_candidates, millis, read_instance, solve, solver_choice, stem, table, usage, Outcome,
};
use crate::args::BenchArgs;
use crate::run::RunContext;

struct Run {
    istar: Option<i64>,
    delta: Option<i64>,
    proven: bool,
    status: Status,
    ms: f64,
}

fn two_stage(inst: &Instance, cands: &CandidateSets, choice: &SolverChoice) -> Result<Run> {
    let start = Instant::now();
    let s1 = solve(
        choice,
        &build_stage1(inst, cands.clone()).context("models")?,
    )?;
    let Some(istar) = s1.objective.as_ref().map(|o| o.imbalance) else {
        return Ok(Run {
            istar: None,
            delta: None,
            proven: false,
            status: s1.status,
            ms: millis(start),
        });
    };
    let spec = build_stage2_efficient(inst, cands.clone(), istar).context("models")?;
    let s2 = solve(choice, &spec)?;
    let status = if s1.status == Status::Optimal {
        s2.status
    } else {
        s1.status
    };
    Ok(Run {
        istar: Some(istar),
        delta: s2.objective.as_ref().map(|o| o.changes),
        proven: s1.status == Status::Optimal && s2.status == Status::Optimal,
        status,
        ms: millis(start),
    })
}

fn opt(x: Option<i64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn run(a: &BenchArgs, ctx: &mut RunContext) -> Result<Outcome> {
    if a.filter.scorer.is_none() {
        return Err(usage("bench needs --scorer"));
    }
    let choice = solver_choice(&a.solver);
    let mut out = Outcome::default();
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut times: Vec<Vec<String>> = Vec::new();
    for path in &a.instance {
        let inst = read_instance(path)?;
        let name = stem(path);
        let full = CandidateSets::full(&inst);
        let filtered = filter_candidates(&inst, &a.filter, a.solver.seed)?.expect("scorer given");
        let base = two_stage(&inst, &full, &choice)?;
        let fast = two_stage(&inst, &filtered.sets, &choice)?;
        for (tag, r) in [("full", &base), ("filtered", &fast)] {
            if matches!(r.status, Status::Infeasible | Status::LimitReached) {
                out.unfinished
                    .push(format!("{name} {tag}: {}", r.status.as_str()));
            }
        }
        let before = full.total_pairs();
        let after = filtered.sets.total_pairs();
        let equal =
            base.proven && fast.proven && base.istar == fast.istar && base.delta == fast.delta;
        rows.push(vec![
            name.clone(),
            inst.num_arcs().to_string(),
            inst.num_resources().to_string(),
            before.to_string(),
            after.to_string(),
            format!(
                "{:.2}",
                100.0 * (before - after) as f64 / before.max(1) as f64
            ),
            format!("{:.3}", filtered.kappa.mean_kappa()),
            opt(base.istar),
            opt(fast.istar),
            opt(base.delta),
            opt(fast.delta),
            base.status.as_str().into(),
            fast.status.as_str().into(),
            equal.to_string(),
        ]);
        times.push(vec![
            name,
            format!("{:.3}", base.ms),
            format!("{:.3}", fast.ms),
            format!("{:.3}", base.ms / fast.ms.max(1e-9)),
        ]);
    }
    let header = [
        "instance",
        "arcs",
        "resources",
        "arcs_before",
        "arcs_after",
        "reduction_pct",
        "mean_kappa",
        "istar_full",
        "istar_filtered",
        "delta_full",
        "delta_filtered",
        "status_full",
        "status_filtered",
        "optimal_equal",
    ];
    let time_header = ["instance", "full_ms", "filtered_ms", "runtime_ratio"];
    let write = |buf: &mut Vec<u8>, header: &[&str], rows: &[Vec<String>]| -> Result<()> {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    };
    ctx.write_csv("bench.csv", |buf| write(buf, &header, &rows))?;
    ctx.write_csv("bench_timings.csv", |buf| write(buf, &time_header, &times))?;

    out.line("instances", rows.len());
    let summary: Vec<Vec<String>> = rows
        .iter()
        .zip(&times)
        .map(|(r, t)| {
            vec![
                r[0].clone(),
                r[3].clone(),
                r[4].clone(),
                r[5].clone(),
                r[13].clone(),
                t[3].clone(),
            ]
        })
        .collect();
    out.table = Some(table(
        &[
            "instance",
            "arcs_before",
            "arcs_after",
            "reduction_pct",
            "optimal_equal",
            "runtime_ratio",
        ],
        &summary,
    ));
    Ok(out)
}
