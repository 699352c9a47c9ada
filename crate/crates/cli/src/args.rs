use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use sigdetect::corpus::{DEFAULT_CORPUS_SEED, DEFAULT_DISCARD_WINDOW};
use sigdetect::instrument::DEFAULT_INTERVAL;

#[derive(Debug, Parser)]
#[command(
    name = "sigdetect",
    version,
    about = "Execution-signal failure detection for a simulated robot controller"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one mission and write its summary stream and trajectory.
    Trace(TraceArgs),
    /// Build a labeled mutant corpus.
    Corpus(CorpusArgs),
    /// Cross-validate on a corpus and save a model trained on all of it.
    Train(TrainArgs),
    /// Score a saved model on a corpus.
    Eval(EvalArgs),
    /// Learning curve over corpus subsample sizes.
    Curve(CurveArgs),
    /// Cross-validation on interval summaries (early detection).
    Early(EarlyArgs),
    /// Feature importances and a reduced-feature rerun.
    Features(FeaturesArgs),
    /// Train on one corpus version and test on another.
    Xversion(XversionArgs),
    /// Instrumentation overhead per mode.
    Overhead(OverheadArgs),
    /// Nominal versus delayed mission behaviour.
    Delaylab(DelaylabArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct Output {
    /// Output directory [default: $SIGDETECT_OUT/<subcommand> or ./sigdetect-out/<subcommand>]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TraceArgs {
    /// `v1`, `v2` or a path to an assembly file.
    #[arg(long, default_value = "v1")]
    pub program: String,
    /// Bundled mission name (M1, M2, M3) or a mission file.
    #[arg(long, default_value = "M1")]
    pub mission: String,
    /// none, naive or optimized.
    #[arg(long, default_value = "optimized")]
    pub mode: String,
    #[arg(long, default_value_t = DEFAULT_INTERVAL)]
    pub interval: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Exit with status 2 when the controller crashes.
    #[arg(long)]
    pub strict: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct CorpusArgs {
    #[arg(long, default_value = "v1")]
    pub program: String,
    /// Comma-separated mission names or files.
    #[arg(long, value_delimiter = ',', default_value = "M1,M2,M3")]
    pub missions: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_INTERVAL)]
    pub interval: u64,
    /// Runs crashing within this many instructions are discarded.
    #[arg(long, default_value_t = DEFAULT_DISCARD_WINDOW)]
    pub discard_window: u64,
    #[arg(long, default_value_t = DEFAULT_CORPUS_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Corpus directory.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Model file written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct CurveArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Comma-separated sample sizes [default: 100, 200, ... and the corpus size]
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct EarlyArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct XversionArgs {
    /// Corpus of the earlier version.
    #[arg(long)]
    pub train: PathBuf,
    /// Corpus of the later version.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct OverheadArgs {
    #[arg(long, default_value = "v1")]
    pub program: String,
    #[arg(long, default_value = "M1")]
    pub mission: String,
    /// Odd, at least 3.
    #[arg(long, default_value_t = 11)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct DelaylabArgs {
    #[arg(long, default_value = "v1")]
    pub program: String,
    #[arg(long, value_delimiter = ',', default_value = "M1,M2,M3")]
    pub missions: Vec<String>,
    /// Topics to intercept.
    #[arg(long, value_delimiter = ',', default_value = "/cmd_vel,/odom")]
    pub topics: Vec<String>,
    /// Delays in seconds [default: 0 and 2^-8 .. 2^0]
    #[arg(long, value_delimiter = ',')]
    pub delays: Vec<f64>,
    /// Number of world seeds, starting at --first-seed.
    #[arg(long, default_value_t = 30)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub first_seed: u64,
    #[command(flatten)]
    pub output: Output,
}
