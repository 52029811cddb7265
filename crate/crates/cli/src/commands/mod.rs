//! Subcommand implementations and the helpers they share.

mod bench;
mod betweenness;
mod gen;
mod lp;
mod portfolio;
mod score;
mod solve;
mod sweep;
mod train;

use std::fs;
use std::path::Path;
use std::time::Duration;

use anyhow::{Context, Result};
use resub_core::betweenness::{
    assign_kappa, edge_betweenness_exact_with, edge_betweenness_sampled_with, quantile_thresholds,
    BetweennessReport, KappaAssignment,
};
use resub_core::candidates::{CandidateFile, CandidateSets};
use resub_core::models::{ModelKind, ModelSpec, Weight};
use resub_core::network::{load_instance, Instance};
use resub_core::scorer::{top_kappa_candidates, ScorerModel};
use resub_core::solver::{IlsParams, Solution, SolveLimits, SolverChoice, Status};
use serde_json::Value;
use thiserror::Error;

use crate::args::{CapArgs, Command, FilterArgs, KappaArgs, KappaChoice, ModelArg, SolverArgs};
use crate::run::RunContext;

/// Invalid combination of arguments that clap cannot express.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// What a finished command reports back.
#[derive(Debug, Default)]
pub struct Outcome {
    /// Solves that ended infeasible or at a limit.
    pub unfinished: Vec<String>,
    /// Key/value lines for `--summary`.
    pub summary: Vec<(String, String)>,
    /// Preformatted table printed under the summary lines.
    pub table: Option<String>,
}

impl Outcome {
    fn line(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    fn track(&mut self, label: &str, sol: &Solution) {
        if matches!(sol.status, Status::Infeasible | Status::LimitReached) {
            self.unfinished
                .push(format!("{label}: {}", sol.status.as_str()));
        }
    }
}

pub fn dispatch(command: &Command, ctx: &mut RunContext) -> Result<Outcome> {
    match command {
        Command::Gen(a) => gen::run(a, ctx),
        Command::Betweenness(a) => betweenness::run(a, ctx),
        Command::Train(a) => train::run(a, ctx),
        Command::Score(a) => score::run(a, ctx),
        Command::Solve(a) => solve::run(a, ctx),
        Command::Sweep(a) => sweep::run(a, ctx),
        Command::Portfolio(a) => portfolio::run(a, ctx),
        Command::ExportLp(a) => lp::run(a, ctx),
        Command::Bench(a) => bench::run(a, ctx),
        Command::Replay(_) => Err(usage("a recorded run cannot itself be a replay")),
    }
}

pub fn read_instance(path: &Path) -> Result<Instance> {
    let file =
        fs::File::open(path).with_context(|| format!("opening instance {}", path.display()))?;
    load_instance(std::io::BufReader::new(file))
        .with_context(|| format!("network: loading instance {}", path.display()))
}

fn read_json(path: &Path, what: &str) -> Result<Value> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {what} {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {what} {}", path.display()))
}

/// Base name of an instance path, used as a row label.
fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// The candidate file's sets, or every admissible resource.
pub fn read_candidates(inst: &Instance, path: Option<&Path>) -> Result<CandidateSets> {
    let Some(path) = path else {
        return Ok(CandidateSets::full(inst));
    };
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading candidates {}", path.display()))?;
    let file: CandidateFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing candidates {}", path.display()))?;
    anyhow::ensure!(
        file.instance_fingerprint == inst.fingerprint(),
        "candidates: {} was built for a different instance",
        path.display()
    );
    let sets = CandidateSets::from_map(inst, &file.candidates)
        .with_context(|| format!("candidates: validating {}", path.display()))?;
    anyhow::ensure!(
        sets.fingerprint(inst) == file.fingerprint,
        "candidates: fingerprint of {} does not match its contents",
        path.display()
    );
    Ok(sets)
}

pub fn load_scorer(path: &Path) -> Result<ScorerModel> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
    ScorerModel::from_json_str(&text)
        .with_context(|| format!("scorer: loading model {}", path.display()))
}

pub fn solver_choice(a: &SolverArgs) -> SolverChoice {
    let mut limits = SolveLimits::default();
    if a.node_limit > 0 {
        limits = limits.with_nodes(a.node_limit);
    }
    if let Some(ms) = a.time_limit_ms {
        limits = limits.with_time(Duration::from_millis(ms));
    }
    SolverChoice {
        limits,
        ils: IlsParams {
            iters: a.ils_iters,
            perturb: None,
        },
        seed: a.seed,
        ..SolverChoice::new(a.backend)
    }
}

pub fn solve(choice: &SolverChoice, spec: &ModelSpec<'_>) -> Result<Solution> {
    choice.solve(spec).context("solver")
}

pub fn model_kind(model: ModelArg, weight: Option<Weight>) -> Result<ModelKind> {
    let need = |name: &str| weight.ok_or_else(|| usage(format!("--model {name} needs --weight")));
    Ok(match model {
        ModelArg::Stage1 => ModelKind::Stage1,
        ModelArg::Stage2Efficient => ModelKind::Stage2Efficient,
        ModelArg::Stage2Minimax => ModelKind::Stage2Minimax,
        ModelArg::Stage2Weighted => ModelKind::Stage2Weighted {
            alpha: need("stage2-weighted")?,
        },
        ModelArg::Stage2Gini => ModelKind::Stage2Gini {
            omega: need("stage2-gini")?,
        },
    })
}

pub fn initial_imbalance(inst: &Instance) -> i64 {
    resub_core::network::total_imbalance(inst, &resub_core::network::Assignment::initial(inst))
        .expect("initial assignment is valid")
        .total
}

/// Stage 1 result as persisted for later Stage 2 runs.
pub fn stage1_record(inst: &Instance, cands: &CandidateSets, sol: &Solution) -> Value {
    let mut v = sol.to_json(inst);
    let obj = v.as_object_mut().expect("solution JSON is an object");
    obj.insert("model".into(), "stage1".into());
    obj.insert("initial_imbalance".into(), initial_imbalance(inst).into());
    obj.insert(
        "istar".into(),
        sol.objective.as_ref().map(|o| o.imbalance).into(),
    );
    obj.insert(
        "istar_proven".into(),
        (sol.status == Status::Optimal).into(),
    );
    obj.insert("instance_fingerprint".into(), inst.fingerprint().into());
    obj.insert(
        "candidate_fingerprint".into(),
        cands.fingerprint(inst).into(),
    );
    v
}

/// I* from `--istar` or from a Stage 1 file computed on exactly these
/// candidate sets.
pub fn read_cap(inst: &Instance, cands: &CandidateSets, cap: &CapArgs) -> Result<Option<i64>> {
    if let Some(i) = cap.istar {
        return Ok(Some(i));
    }
    let Some(path) = &cap.stage1 else {
        return Ok(None);
    };
    let v = read_json(path, "stage-1 result")?;
    anyhow::ensure!(
        v["model"] == "stage1",
        "{} is not a stage-1 result",
        path.display()
    );
    let field = |k: &str| v[k].as_str().unwrap_or_default().to_string();
    anyhow::ensure!(
        field("instance_fingerprint") == inst.fingerprint(),
        "stage-1 result {} was computed on a different instance",
        path.display()
    );
    let expected = cands.fingerprint(inst);
    let found = field("candidate_fingerprint");
    anyhow::ensure!(
        found == expected,
        "stage-1 result {} was computed on different candidate sets \
         (fingerprint {found}, current {expected}); rerun stage 1 on these candidates",
        path.display()
    );
    let istar = v["istar"]
        .as_i64()
        .with_context(|| format!("stage-1 result {} holds no imbalance", path.display()))?;
    Ok(Some(istar))
}

pub fn require_cap(inst: &Instance, cands: &CandidateSets, cap: &CapArgs) -> Result<i64> {
    read_cap(inst, cands, cap)?.ok_or_else(|| {
        usage("stage 2 models need --istar or --stage1 (a result of `solve --model stage1`)")
    })
}

/// Betweenness report and κ per arc from `args`.
pub fn compute_kappa(
    inst: &Instance,
    args: &KappaArgs,
    seed: u64,
) -> Result<(BetweennessReport, KappaAssignment)> {
    let metric = args.metric.into();
    let report = match args.samples {
        Some(s) => edge_betweenness_sampled_with(inst, s, seed, metric).context("betweenness")?,
        None => edge_betweenness_exact_with(inst, metric),
    };
    let tau = quantile_thresholds(&report, args.q1, args.q2).context("betweenness")?;
    let &[lo, med, hi] = args.class_kappas.as_slice() else {
        return Err(usage("--class-kappas takes three values: low,medium,high"));
    };
    let kappa = assign_kappa(&report, tau, (lo, med, hi)).context("betweenness")?;
    Ok((report, kappa))
}

/// κ file contents.
pub fn kappa_record(inst: &Instance, report: &BetweennessReport, kappa: &KappaAssignment) -> Value {
    let arcs: Vec<Value> = report
        .arc_ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            serde_json::json!({
                "id": id,
                "betweenness": report.values[i],
                "class": kappa.class[i],
                "kappa": kappa.kappa[i],
            })
        })
        .collect();
    serde_json::json!({
        "instance_fingerprint": inst.fingerprint(),
        "method": report.method,
        "metric": report.metric,
        "thresholds": [kappa.thresholds.0, kappa.thresholds.1],
        "class_kappas": [kappa.class_kappas.0, kappa.class_kappas.1, kappa.class_kappas.2],
        "mean_kappa": kappa.mean_kappa(),
        "arcs": arcs,
    })
}

fn read_kappa_file(inst: &Instance, path: &Path) -> Result<KappaAssignment> {
    let v = read_json(path, "kappa file")?;
    anyhow::ensure!(
        v["instance_fingerprint"].as_str() == Some(inst.fingerprint().as_str()),
        "kappa file {} was computed on a different instance",
        path.display()
    );
    let arcs = v["arcs"]
        .as_array()
        .context("kappa file has no `arcs` list")?;
    let mut kappa = vec![0u32; inst.num_arcs()];
    let mut class = vec![resub_core::betweenness::ArcClass::High; inst.num_arcs()];
    for row in arcs {
        let id = row["id"].as_str().context("kappa row without `id`")?;
        let a = inst
            .arc_idx(id)
            .with_context(|| format!("kappa file names unknown arc `{id}`"))?;
        let k = row["kappa"].as_u64().context("kappa row without `kappa`")?;
        anyhow::ensure!(k >= 1, "arc `{id}` has kappa 0");
        kappa[a] = k as u32;
        class[a] = serde_json::from_value(row["class"].clone()).context("kappa row class")?;
    }
    if let Some(a) = kappa.iter().position(|&k| k == 0) {
        anyhow::bail!("kappa file misses arc `{}`", inst.arc(a).id);
    }
    let pair = |k: &str| -> Result<Vec<Value>> {
        Ok(v[k]
            .as_array()
            .with_context(|| format!("kappa file has no `{k}`"))?
            .clone())
    };
    let t = pair("thresholds")?;
    let c = pair("class_kappas")?;
    let num = |x: &Value| x.as_f64().unwrap_or(f64::NEG_INFINITY);
    let int = |x: &Value| x.as_u64().unwrap_or(1) as u32;
    Ok(KappaAssignment {
        kappa,
        class,
        thresholds: (num(&t[0]), num(&t[1])),
        class_kappas: (int(&c[0]), int(&c[1]), int(&c[2])),
    })
}

/// Candidate sets filtered by a scorer, with a description of how.
pub struct Filtered {
    pub sets: CandidateSets,
    pub kappa: KappaAssignment,
    pub meta: Value,
}

/// Apply `--scorer` with the chosen κ; `None` without a scorer.
pub fn filter_candidates(inst: &Instance, f: &FilterArgs, seed: u64) -> Result<Option<Filtered>> {
    let Some(path) = &f.scorer else {
        if f.kappa.is_some() || f.kappa_file.is_some() {
            return Err(usage("--kappa and --kappa-file need --scorer"));
        }
        return Ok(None);
    };
    let model = load_scorer(path)?;
    let (kappa, mode) = match (f.kappa, &f.kappa_file) {
        (Some(KappaChoice::Fixed(k)), _) => (
            KappaAssignment::uniform(inst.num_arcs(), k),
            format!("static {k}"),
        ),
        (Some(KappaChoice::Max), _) => {
            let widest = inst
                .arcs()
                .iter()
                .map(|a| a.candidates.len())
                .max()
                .unwrap_or(1);
            (
                KappaAssignment::uniform(inst.num_arcs(), widest as u32),
                "max".into(),
            )
        }
        (None, Some(p)) => (read_kappa_file(inst, p)?, "file".into()),
        (None, None) => (compute_kappa(inst, &f.dynamic, seed)?.1, "dynamic".into()),
    };
    let sets = top_kappa_candidates(inst, &model, &kappa);
    let meta = serde_json::json!({
        "kappa_mode": mode,
        "mean_kappa": kappa.mean_kappa(),
        "pairs_before": CandidateSets::full(inst).total_pairs(),
        "pairs_after": sets.total_pairs(),
    });
    Ok(Some(Filtered { sets, kappa, meta }))
}

/// Left-aligned text table.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate() {
            width[i] = width[i].max(c.chars().count());
        }
    }
    let fmt = |cells: Vec<&str>| {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{c:<w$}", w = width[i]))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = fmt(header.to_vec());
    out.push('\n');
    for r in rows {
        out.push_str(&fmt(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

/// Milliseconds elapsed since `start`, with sub-millisecond precision.
fn millis(start: std::time::Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1000.0
}

fn write_timings(ctx: &mut RunContext, name: &str, rows: &[(String, f64)]) -> Result<()> {
    ctx.write_csv(name, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["step", "wall_ms"])?;
        for (step, ms) in rows {
            w.write_record([step.clone(), format!("{ms:.3}")])?;
        }
        w.flush()?;
        Ok(())
    })
}
