//! `fairsel`: information-theoretic feature scoring for fair selection.

mod commands;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use fairsel::Execution;

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "fairsel", version, about = "Score, select, and audit features for accuracy and fairness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose I(T; R1, R2) into unique, shared, and synergistic parts.
    Pid(PidArgs),
    /// Per-feature accuracy and discrimination scores.
    Score(ScoreArgs),
    /// Pick features from a score report.
    Select(SelectArgs),
    /// Build a causal model and optionally sample from it.
    Synth(SynthArgs),
    /// Bayes plug-in error and bias with each feature removed.
    Sweep(SweepArgs),
    /// Encode a raw ProPublica COMPAS export.
    CompasPrep(CompasArgs),
}

#[derive(Args, Clone)]
pub struct SolverArgs {
    /// Stopping tolerance on the objective decrease and Frank-Wolfe gap (bits).
    #[arg(long, default_value_t = 1e-10)]
    pub objective_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iterations: usize,
}

/// Where the joint distribution comes from.
#[derive(Args, Clone)]
#[command(group(ArgGroup::new("source").required(true).args(["joint", "model", "data"])))]
pub struct SourceArgs {
    /// Joint-distribution JSON file.
    #[arg(long)]
    pub joint: Option<PathBuf>,
    /// Causal model JSON file (exact joint).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// CSV dataset (needs --schema).
    #[arg(long, requires = "schema")]
    pub data: Option<PathBuf>,
    /// Schema spec JSON for --data.
    #[arg(long, requires = "data")]
    pub schema: Option<PathBuf>,
    /// Additive smoothing for the empirical joint of --data.
    #[arg(long, default_value_t = 0.0)]
    pub smoothing: f64,
}

#[derive(Args)]
pub struct PidArgs {
    /// Joint-distribution JSON file. With three variables and no role
    /// flags they are read as (T, R1, R2).
    pub input: PathBuf,
    #[arg(long)]
    pub target: Option<String>,
    /// Variables forming the first source (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub source1: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub source2: Vec<String>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Exact up to --exact-limit features, sampled beyond.
    Auto,
    Exact,
    Mc,
}

#[derive(Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Weight of the discrimination score in F = phi_acc - alpha * phi_d.
    #[arg(long, default_value_t = fairsel::shapley::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = Mode::Auto)]
    pub mode: Mode,
    #[arg(long, default_value_t = fairsel::shapley::DEFAULT_EXACT_LIMIT)]
    pub exact_limit: usize,
    #[arg(long, default_value_t = 2000)]
    pub permutations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Include every subset's coefficients in the report.
    #[arg(long)]
    pub dump_table: bool,
    /// JSON report path; a CSV mirror is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("policy").required(true).args(["top_k", "threshold"])))]
pub struct SelectArgs {
    /// Score report written by `fairsel score`.
    pub scores: PathBuf,
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Keep features with F >= this value.
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("structure").required(true).args(["graph", "fixture"])))]
pub struct SynthArgs {
    /// Graph JSON: {nodes: [{name, cardinality, role}], edges: [[parent, child]]}.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// single_parent_y, single_child_a, path_blocking, independent_feature,
    /// or stand_in.
    #[arg(long)]
    pub fixture: Option<String>,
    /// Feature count for fixtures.
    #[arg(long, default_value_t = 3)]
    pub features: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = fairsel::synth::DEFAULT_CONCENTRATION)]
    pub concentration: f64,
    /// Records to sample; 0 writes the model only.
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    /// Model JSON path.
    #[arg(long)]
    pub out: PathBuf,
    /// Sample CSV path (default: next to the model).
    #[arg(long)]
    pub samples_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct CompasArgs {
    /// Raw CSV export (or an already encoded file).
    pub raw: PathBuf,
    /// Encoded CSV output; its schema spec is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Summary JSON path (default: stdout).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

/// Honors `FAIRSEL_THREADS`: 1 runs sequentially, larger values size the pool.
fn execution() -> Result<Execution, CliError> {
    let Ok(raw) = std::env::var("FAIRSEL_THREADS") else {
        return Ok(Execution::Parallel);
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("FAIRSEL_THREADS must be a positive integer, got {raw:?}")))?;
    if threads == 1 {
        return Ok(Execution::Sequential);
    }
    #[cfg(feature = "parallel")]
    {
        // only fails if a pool exists already, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    Ok(Execution::Parallel)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let exec = execution()?;
    match cli.command {
        Command::Pid(a) => commands::pid(a),
        Command::Score(a) => commands::score(a, exec),
        Command::Select(a) => commands::select(a),
        Command::Synth(a) => commands::synth(a),
        Command::Sweep(a) => commands::sweep(a, exec),
        Command::CompasPrep(a) => commands::compas_prep(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
