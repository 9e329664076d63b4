//! Command-line driver: end-to-end selection, sampler benchmarks, Monte
//! Carlo evaluation and exact oracles.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hmp_core::graph::ProbabilityModel;

pub use manifest::Manifest;

/// Exit status for bad flags or parameter values.
pub const EXIT_USAGE: i32 = 1;
/// Exit status for unreadable or malformed input.
pub const EXIT_DATA: i32 = 2;
/// Exit status when the instance gives nothing to measure.
pub const EXIT_DEGENERATE: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Usage(#[from] clap::Error),
    #[error("{0}")]
    Core(#[from] hmp_core::Error),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use hmp_core::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::File { .. } => EXIT_DATA,
            CliError::Core(e) => match e {
                E::Domain(_) | E::TooLarge(_) => EXIT_USAGE,
                E::Parse { .. } | E::Io(_) | E::Invariant(_) => EXIT_DATA,
                E::Degenerate(_) => EXIT_DEGENERATE,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Where seed nodes come from. Nodes are named by their labels in the edge
/// list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SeedSource {
    /// The `K` nodes with the highest estimated individual influence.
    Auto(usize),
    /// `list:3,17,42`.
    List(Vec<u64>),
    /// A file of whitespace-separated labels.
    File(PathBuf),
}

impl FromStr for SeedSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if let Some(k) = s.strip_prefix("auto:") {
            return k
                .parse()
                .map(SeedSource::Auto)
                .map_err(|_| format!("invalid seed count in `{s}`"));
        }
        if let Some(list) = s.strip_prefix("list:") {
            return list
                .split(',')
                .filter(|t| !t.is_empty())
                .map(|t| t.trim().parse().map_err(|_| format!("invalid node label `{t}`")))
                .collect::<std::result::Result<_, _>>()
                .map(SeedSource::List);
        }
        Ok(SeedSource::File(PathBuf::from(s)))
    }
}

#[derive(Debug, Parser)]
#[command(name = "hmp", version, about = "Misinformation prevention by hybrid sampling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select positive seeds with approximation guarantees and write a run manifest.
    Run(RunConfig),
    /// Compare hybrid and uniform reverse sampling at increasing sample counts (CSV).
    Benchmark(BenchmarkConfig),
    /// Monte Carlo estimate of the prevention effect of a positive seed set.
    Evaluate(EvaluateConfig),
    /// Exact values by enumerating every realization (tiny graphs only).
    Oracle(OracleConfig),
    /// Dump hybrid R-samples to a text file.
    Sample(SampleConfig),
    /// Greedy seed selection from an R-sample dump.
    Cover(CoverConfig),
    /// Write a synthetic scale-free edge list.
    Generate(GenerateConfig),
}

/// Graph, misinformation and execution settings shared by most commands.
#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    /// Edge list: `u v` or `u v p` per line.
    #[arg(long)]
    pub graph: PathBuf,
    /// Propagation probabilities: uniform:P, wc (1/in-degree) or file.
    #[arg(long, default_value = "wc", value_parser = parse_model)]
    pub prob: ProbabilityModel,
    /// Misinformation seeds: FILE, list:L1,L2,... or auto:K.
    #[arg(long = "misinfo-seeds", default_value = "auto:15")]
    pub misinfo_seeds: SeedSource,
    /// Master random seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for sampling (0 = all cores). Outputs do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

fn parse_model(s: &str) -> std::result::Result<ProbabilityModel, String> {
    s.parse().map_err(|e: hmp_core::Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Number of positive seeds.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Accuracy loss against 1 - 1/e, in (0, 1 - 1/e).
    #[arg(long, default_value_t = 0.3)]
    pub epsilon: f64,
    /// Confidence parameter (success probability 1 - 3/N); defaults to the node count.
    #[arg(long = "big-n")]
    pub big_n: Option<f64>,
    /// Manifest path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sample cap for the lower-bound phase.
    #[arg(long, default_value_t = 100_000_000)]
    pub sample_budget: u64,
    /// On a degenerate instance use OPT_L = k instead of failing (no guarantee).
    #[arg(long)]
    pub fallback: bool,
    /// Give reached misinformation seeds an (empty) protector set too.
    #[arg(long)]
    pub strict_seed_roots: bool,
    /// Leave wall-clock timings out so reruns are byte-identical.
    #[arg(long)]
    pub no_timings: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Hybrid,
    Uniform,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkConfig {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Ascending comma-separated sample counts.
    #[arg(long, value_delimiter = ',', required = true)]
    pub samples: Vec<usize>,
    #[arg(long, value_enum, default_value_t = Method::Both)]
    pub method: Method,
    /// Monte Carlo simulations per evaluation.
    #[arg(long, default_value_t = 10_000)]
    pub sims: u64,
    /// CSV path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write zero timing columns so reruns are byte-identical.
    #[arg(long)]
    pub no_timings: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateConfig {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Positive seeds: FILE or list:L1,L2,...
    #[arg(long)]
    pub positive: SeedSource,
    #[arg(long, default_value_t = 10_000)]
    pub sims: u64,
}

#[derive(Debug, Clone, Args)]
pub struct OracleConfig {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Positive seeds to evaluate exactly: FILE or list:L1,L2,...
    #[arg(long, conflicts_with = "opt", required_unless_present = "opt")]
    pub positive: Option<SeedSource>,
    /// Find the best seed set of this size instead.
    #[arg(long)]
    pub opt: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SampleConfig {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long)]
    pub samples: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CoverConfig {
    /// The graph the dump was sampled from.
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value = "wc", value_parser = parse_model)]
    pub prob: ProbabilityModel,
    #[arg(long)]
    pub dump: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateConfig {
    #[arg(long)]
    pub nodes: usize,
    /// Links added per new node.
    #[arg(long, default_value_t = 3)]
    pub attach: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (including the program name) and runs the command, writing
/// results to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    execute(cli.command, out)
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Run(c) => commands::run_hmp(&c, out),
        Command::Benchmark(c) => commands::benchmark(&c, out),
        Command::Evaluate(c) => commands::evaluate(&c, out),
        Command::Oracle(c) => commands::oracle(&c, out),
        Command::Sample(c) => commands::sample(&c, out),
        Command::Cover(c) => commands::cover(&c, out),
        Command::Generate(c) => commands::generate(&c, out),
    }
}

pub use commands::{graph_hash, CSV_HEADER};
