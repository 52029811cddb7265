//! Command-line arguments.
//!
//! Every subcommand's arguments serialize, so a run can be recorded in
//! `run.json`, hashed, and replayed.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use resub_core::betweenness::PathMetric;
use resub_core::generator::MatrixChoice;
use resub_core::models::Weight;
use resub_core::solver::Backend;
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "resub",
    version,
    about = "Fair resource substitution on task networks"
)]
pub struct Cli {
    /// Directory receiving every output file.
    #[arg(long, global = true, env = "RESUB_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,

    /// Print a human-readable table instead of the JSON status line.
    #[arg(long, global = true)]
    pub summary: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Generate instances, reference pools and fixtures.
    Gen(GenArgs),
    /// Edge betweenness and per-arc candidate limits.
    Betweenness(BetweennessArgs),
    /// Train the arc scorer on a reference pool.
    Train(TrainArgs),
    /// Filter candidate sets with a trained scorer.
    Score(ScoreArgs),
    /// Solve one model.
    Solve(SolveArgs),
    /// Solve a grid of weighted or Gini models.
    Sweep(SweepArgs),
    /// Full pipeline: filter, Stage 1, Stage 2 variants, reports.
    Portfolio(PortfolioArgs),
    /// Write a model in LP format.
    ExportLp(ExportLpArgs),
    /// Compare filtered against unfiltered solving.
    Bench(BenchArgs),
    /// Re-run a recorded `run.json`.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenArgs {
    #[command(subcommand)]
    pub what: GenWhat,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GenWhat {
    /// One instance of a class.
    Instance(GenInstanceArgs),
    /// Weekly instances per class, solved into reference assignments.
    Pool(GenPoolArgs),
    /// The three-scheduler redistribution instance.
    Example1(GenExampleArgs),
    /// A built-in fixture (t1, d1, p3, star, diamond).
    Fixture(GenFixtureArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixArg {
    Builtin,
    Full,
    Identity,
}

impl From<MatrixArg> for MatrixChoice {
    fn from(m: MatrixArg) -> Self {
        match m {
            MatrixArg::Builtin => MatrixChoice::Builtin,
            MatrixArg::Full => MatrixChoice::Full,
            MatrixArg::Identity => MatrixChoice::Identity,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ClassArgs {
    /// JSON file with complete class parameters; replaces the flags below.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value = "desk")]
    pub label: String,
    #[arg(long, default_value_t = 3)]
    pub schedulers: usize,
    #[arg(long, default_value_t = 9)]
    pub nodes: usize,
    #[arg(long, default_value_t = 18)]
    pub arcs: usize,
    #[arg(long, default_value_t = 8)]
    pub resources: usize,
    /// Fraction of arcs crossing scheduler boundaries.
    #[arg(long, default_value_t = 0.3)]
    pub collaboration: f64,
    /// Accepted initial imbalance range, `LO,HI`.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub band: Option<Vec<i64>>,
    #[arg(long, value_enum, default_value_t = MatrixArg::Builtin)]
    pub matrix: MatrixArg,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenInstanceArgs {
    #[command(flatten)]
    pub class: ClassArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "instance.json")]
    pub output: String,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenPoolArgs {
    #[command(flatten)]
    pub class: ClassArgs,
    /// Number of classes; class k uses the class seed plus k.
    #[arg(long, default_value_t = 1)]
    pub classes: usize,
    /// Weekly instances per class.
    #[arg(long, default_value_t = 13)]
    pub weeks: usize,
    /// Optimal assignments kept per instance.
    #[arg(long, default_value_t = 1)]
    pub alternates: usize,
    #[arg(long, default_value_t = 5_000_000)]
    pub node_limit: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenExampleArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "example1.json")]
    pub output: String,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenFixtureArgs {
    /// Fixture name.
    #[arg(long)]
    pub name: String,
    /// Defaults to `<name>.json`.
    #[arg(long)]
    pub output: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricArg {
    Hops,
    Miles,
}

impl From<MetricArg> for PathMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Hops => PathMetric::Hops,
            MetricArg::Miles => PathMetric::Miles,
        }
    }
}

/// Betweenness settings that turn B(a) into per-arc κ.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct KappaArgs {
    /// Pivot count for sampled betweenness; exact when absent.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, value_enum, default_value_t = MetricArg::Hops)]
    pub metric: MetricArg,
    /// Quantile of the low/medium threshold.
    #[arg(long, default_value_t = 0.6)]
    pub q1: f64,
    /// Quantile of the medium/high threshold.
    #[arg(long, default_value_t = 0.9)]
    pub q2: f64,
    /// κ for the low, medium and high classes.
    #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
    pub class_kappas: Vec<u32>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BetweennessArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[command(flatten)]
    pub kappa: KappaArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Pool directory written by `gen pool`.
    #[arg(long)]
    pub pool: PathBuf,
    /// Training configuration JSON; defaults apply to missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// κ values of the TOP_κ report; 1..=|R| when absent.
    #[arg(long, value_delimiter = ',')]
    pub kappas: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// A fixed κ, or every admissible resource.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KappaChoice {
    Fixed(u32),
    Max,
}

impl FromStr for KappaChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "max" {
            return Ok(KappaChoice::Max);
        }
        match s.parse::<u32>() {
            Ok(k) if k >= 1 => Ok(KappaChoice::Fixed(k)),
            _ => Err(format!("expected a positive integer or `max`, got `{s}`")),
        }
    }
}

/// How candidate sets are filtered by a scorer.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FilterArgs {
    /// Trained scorer model file.
    #[arg(long)]
    pub scorer: Option<PathBuf>,
    /// Same κ on every arc (`max` keeps every admissible resource).
    #[arg(long, conflicts_with = "kappa_file")]
    pub kappa: Option<KappaChoice>,
    /// Per-arc κ written by `betweenness`.
    #[arg(long)]
    pub kappa_file: Option<PathBuf>,
    /// Used when neither `--kappa` nor `--kappa-file` is given.
    #[command(flatten)]
    pub dynamic: KappaArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[command(flatten)]
    pub filter: FilterArgs,
    /// Reference assignment; adds a TOP_κ table over the instance's arcs.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    Stage1,
    Stage2Efficient,
    Stage2Minimax,
    Stage2Weighted,
    Stage2Gini,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SolverArgs {
    #[arg(long, default_value = "exact")]
    pub backend: Backend,
    /// Branch-and-bound node budget; 0 means unlimited.
    #[arg(long, default_value_t = 20_000_000)]
    pub node_limit: u64,
    /// Wall-clock budget in milliseconds. Makes results timing dependent.
    #[arg(long)]
    pub time_limit_ms: Option<u64>,
    /// ILS rounds without improvement before stopping.
    #[arg(long, default_value_t = 50)]
    pub ils_iters: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Where the Stage 2 imbalance cap comes from.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CapArgs {
    /// Imbalance cap I*.
    #[arg(long, conflicts_with = "stage1", allow_negative_numbers = true)]
    pub istar: Option<i64>,
    /// Stage 1 result written by `solve --model stage1`.
    #[arg(long)]
    pub stage1: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// α for stage2-weighted, ω for stage2-gini (decimal or fraction).
    #[arg(long)]
    pub weight: Option<Weight>,
    #[command(flatten)]
    pub cap: CapArgs,
    /// Candidate file written by `score`; every admissible resource otherwise.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output file name; defaults to `<model>.json`.
    #[arg(long)]
    pub output: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    /// Fairness weights of the weighted model.
    #[arg(long, value_delimiter = ',', required_unless_present = "omegas")]
    pub alphas: Option<Vec<Weight>>,
    /// Fairness weights of the Gini model.
    #[arg(long, value_delimiter = ',', conflicts_with = "alphas")]
    pub omegas: Option<Vec<Weight>>,
    /// Solved on the same candidate sets when absent.
    #[command(flatten)]
    pub cap: CapArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PortfolioArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, conflicts_with = "scorer")]
    pub candidates: Option<PathBuf>,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
    pub alphas: Vec<Weight>,
    #[arg(long, value_delimiter = ',')]
    pub omegas: Vec<Weight>,
    /// Fractions of each plan at which the partial-implementation curve is sampled.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1"
    )]
    pub levels: Vec<Weight>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExportLpArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long)]
    pub weight: Option<Weight>,
    #[command(flatten)]
    pub cap: CapArgs,
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    /// Defaults to `<model>.lp`.
    #[arg(long)]
    pub output: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BenchArgs {
    /// Instance files; one report row each.
    #[arg(long, required = true, num_args = 1..)]
    pub instance: Vec<PathBuf>,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// A `run.json` written by an earlier run.
    pub run: PathBuf,
}
