//! `decompcheck`: run and score sub-claim fact-checking experiments.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error,
//! 4 refusal to score partial coverage.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use decompcheck::model::{EvidenceConfiguration, LabelRegime};
use decompcheck::pipeline::AggregationRule;
use decompcheck::report::ReportFormat;

use crate::config::{BackendKind, Config};
use crate::error::CliResult;

#[derive(Parser, Debug)]
#[command(name = "decompcheck", version, about = "Sub-claim decomposition fact-checking harness")]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// More log output on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load and check a dataset, print its label distribution.
    Validate(ValidateArgs),
    /// Write train and test datasets.
    Split(SplitArgs),
    /// Decompose claims into sub-claims with a backend.
    Decompose(DecomposeArgs),
    /// Verify every sub-claim against its claim's evidence.
    RunSubclaims(RunSubclaimsArgs),
    /// Verify claims under one evidence configuration and label regime.
    RunClaims(RunClaimsArgs),
    /// Score claim prediction files.
    Evaluate(EvaluateArgs),
    /// Paired bootstrap and McNemar test between two claim prediction files.
    Compare(CompareArgs),
    /// Error profile of sub-claim prediction files.
    Profile(ProfileArgs),
    /// Agreement between two annotated versions of a dataset.
    Iaa(IaaArgs),
    /// Result table over several claim prediction files.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Dataset JSONL file.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
struct BackendArgs {
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// Backend tag recorded with every prediction.
    #[arg(long)]
    backend_tag: Option<String>,
    /// Prediction store for the replay backend.
    #[arg(long)]
    store: Option<PathBuf>,
    /// Chat-completion endpoint URL.
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name sent to the chat endpoint.
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    #[command(flatten)]
    backend: BackendArgs,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Prediction cache; reused answers are never regenerated.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Map unparseable sub-claim outputs to U.
    #[arg(long)]
    lenient_parse: bool,
    /// Stop after this many backend calls.
    #[arg(long)]
    max_calls: Option<usize>,
    #[arg(long)]
    max_in_flight: Option<usize>,
    /// Prediction JSONL to write; the manifest goes next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutputFormat {
    Markdown,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TemporalArg {
    Claim,
    Window,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Drop documents published after their claim, or outside a window.
    #[arg(long, value_enum)]
    temporal: Option<TemporalArg>,
    #[arg(long, requires = "window_end")]
    window_start: Option<i64>,
    #[arg(long, requires = "window_start")]
    window_end: Option<i64>,
    /// Keep only claims passing the complexity filter.
    #[arg(long)]
    complexity: bool,
    #[arg(long, default_value_t = 2)]
    min_sentences: usize,
    #[arg(long, default_value_t = 3)]
    min_verbs: usize,
    /// Write the (filtered) dataset here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "markdown")]
    format: OutputFormat,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitModeArg {
    Random,
    LeaveOneEventOut,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitLevelArg {
    Claim,
    Subclaim,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "random")]
    mode: SplitModeArg,
    /// Train fraction for random splits.
    #[arg(long, default_value_t = 0.8)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Held-out event for leave-one-event-out.
    #[arg(long, required_if_eq("mode", "leave-one-event-out"))]
    event: Option<String>,
    #[arg(long, value_enum, default_value = "subclaim")]
    level: SplitLevelArg,
    /// Directory receiving train.jsonl and test.jsonl.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    backend: BackendArgs,
    /// JSONL of {claim_id, subclaims}; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunSubclaimsArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct RunClaimsArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    /// vanilla, sre, sae, abl_sre or abl_sae.
    #[arg(long)]
    configuration: EvidenceConfiguration,
    /// oracle, none or predicted:<source>.
    #[arg(long, default_value = "none")]
    regime: LabelRegime,
    /// Sub-claim predictions feeding a predicted regime.
    #[arg(long)]
    subclaim_predictions: Option<PathBuf>,
    /// Aggregate sub-claim labels with a fixed rule instead of a backend.
    #[arg(long)]
    rule: Option<AggregationRule>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Claim prediction files, as PATH or NAME=PATH.
    #[arg(long = "predictions", required = true)]
    predictions: Vec<String>,
    #[arg(long)]
    allow_partial: bool,
    #[arg(long, value_enum, default_value = "markdown")]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    /// System predictions, as PATH or NAME=PATH.
    #[arg(long)]
    system: String,
    /// Baseline predictions, as PATH or NAME=PATH.
    #[arg(long)]
    baseline: String,
    #[arg(long)]
    n_resamples: Option<usize>,
    #[arg(long)]
    bootstrap_seed: Option<u64>,
    #[arg(long)]
    allow_partial: bool,
    #[arg(long, value_enum, default_value = "markdown")]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProfileArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Sub-claim prediction files, as PATH or NAME=PATH.
    #[arg(long = "predictions", required = true)]
    predictions: Vec<String>,
    #[arg(long)]
    allow_partial: bool,
    #[arg(long, value_enum, default_value = "markdown")]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IaaArgs {
    /// First annotator's dataset.
    #[arg(long)]
    a: PathBuf,
    /// Second annotator's dataset.
    #[arg(long)]
    b: PathBuf,
    /// Highest BLEU n-gram order.
    #[arg(long, default_value_t = 4)]
    max_n: usize,
    /// Disable add-one smoothing of higher-order BLEU precisions.
    #[arg(long)]
    no_smoothing: bool,
    #[arg(long, value_enum, default_value = "markdown")]
    format: OutputFormat,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Claim prediction files, as NAME=PATH, one per setup.
    #[arg(long = "run", required = true)]
    runs: Vec<String>,
    /// Name of the baseline setup.
    #[arg(long)]
    baseline: String,
    #[arg(long, default_value = "markdown")]
    format: ReportFormat,
    #[arg(long)]
    n_resamples: Option<usize>,
    #[arg(long)]
    bootstrap_seed: Option<u64>,
    #[arg(long)]
    allow_partial: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_env("DECOMPCHECK_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

fn run(cli: Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Validate(a) => commands::data::validate(&config, a),
        Command::Split(a) => commands::data::split(&config, a),
        Command::Decompose(a) => commands::run::decompose(config, a),
        Command::RunSubclaims(a) => commands::run::run_subclaims(config, a),
        Command::RunClaims(a) => commands::run::run_claims(config, a),
        Command::Evaluate(a) => commands::analyze::evaluate(&config, a),
        Command::Compare(a) => commands::analyze::compare(&config, a),
        Command::Profile(a) => commands::analyze::profile(&config, a),
        Command::Iaa(a) => commands::analyze::iaa(a),
        Command::Report(a) => commands::analyze::report(&config, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(error::Exit::Usage as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}
