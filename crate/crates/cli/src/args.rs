use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use procmatch::boost::RbVariant;
use procmatch::engine::{EstimatorKind, ThresholdMode};
use procmatch::sim::ProfileDistribution;
use procmatch::theory::MeasureKind;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "procmatch", version, about = "Process-aware schema matching")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Simulate a cohort of matchers on a task and write it as a bundle.
    Simulate(SimulateArgs),
    /// Train the recurrent calibrator on a cohort.
    Train(TrainArgs),
    /// Cross-validate raw, baseline and calibrated processing on a cohort.
    Evaluate(EvaluateArgs),
    /// Process recorded histories under a target and threshold policy.
    Replay(ReplayArgs),
    /// Sweep the recall-boosting parameter over a grid.
    Sweep(SweepArgs),
    /// Run the algorithmic matchers on a task's schemas.
    Match(MatchArgs),
    /// Serve interactive matching sessions over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PolicyArgs {
    /// Measure to protect: r, p or f.
    #[arg(long, default_value = "f")]
    pub target: MeasureKind,
    #[arg(long, default_value = "dynamic")]
    pub mode: ThresholdMode,
    #[arg(long, default_value = "unbiased")]
    pub estimator: EstimatorKind,
    /// Calibrator artifact, required by the calibrated estimator.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Profile distribution: biased or unbiased.
    #[arg(long, default_value = "biased", value_parser = check_profiles)]
    pub profiles: String,
    /// Bundle with a reference and a matrix to simulate on; a synthetic task otherwise.
    #[arg(long)]
    pub task: Option<PathBuf>,
    /// Seed of the synthetic task; defaults to --seed.
    #[arg(long)]
    pub task_seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

fn check_profiles(s: &str) -> Result<String, procmatch::Error> {
    s.parse::<ProfileDistribution>().map(|_| s.to_string())
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 128)]
    pub dense: usize,
    #[arg(long, value_enum, default_value_t = Layout::Shared)]
    pub layout: Layout,
    /// Artifact path for the trained calibrator.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Shared,
    Separate,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value = "uniform")]
    pub rb_variant: RbVariant,
    /// Recall-boosting grid as lo..hi:step.
    #[arg(long, default_value = "0..1:0.05")]
    pub grid: String,
    /// Directory for CSV tables and the JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ReplayArgs {
    /// Task bundle holding the histories.
    #[arg(long)]
    pub task: PathBuf,
    /// History name within the bundle or a JSONL path; every bundled history otherwise.
    #[arg(long)]
    pub history: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub policy: PolicyArgs,
    #[arg(long)]
    pub ref_size: Option<usize>,
    /// Boost the processed match with this variant before reporting.
    #[arg(long)]
    pub rb_variant: Option<RbVariant>,
    #[arg(long, default_value_t = 0.9)]
    pub rb_param: f64,
    /// CSV of every verdict.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// Cohort or task bundle with a reference and histories.
    #[arg(long)]
    pub cohort: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub policy: PolicyArgs,
    #[arg(long, default_value = "uniform")]
    pub rb_variant: RbVariant,
    #[arg(long, default_value = "0..1:0.05")]
    pub grid: String,
    /// CSV of the sweep curve.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SecondLine {
    Threshold,
    MaxDeltaRow,
    MaxDeltaCol,
    Dominants,
}

#[derive(Debug, Args, Serialize)]
pub struct MatchArgs {
    #[arg(long)]
    pub task: PathBuf,
    #[arg(long, value_enum, default_value_t = SecondLine::Threshold)]
    pub slm: SecondLine,
    /// Threshold or max-delta window.
    #[arg(long, default_value_t = 0.5)]
    pub param: f64,
    /// Tab-separated synonym lexicon replacing the bundled one.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Use the bundle's matrix instead of running the first-line matchers.
    #[arg(long)]
    pub bundled: bool,
    /// CSV path for the similarity matrix.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ServeArgs {
    /// A task bundle or a directory of bundles.
    #[arg(long)]
    pub tasks: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Append-only session logs, replayed on start.
    #[arg(long)]
    pub log_dir: Option<PathBuf>,
    /// Origin allowed by CORS; any origin when absent.
    #[arg(long)]
    pub ui_origin: Option<String>,
}
