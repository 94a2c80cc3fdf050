use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod exit;
mod score;

use exit::Failure;

#[derive(Parser, Debug)]
#[command(name = "graphmm", version, about = "Local false-discovery rates over graph-respecting partitions")]
struct Cli {
    /// Worker threads for scoring and simulation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Count (and optionally list) the graph-respecting partitions of a graph.
    Enumerate(EnumerateArgs),
    /// Estimate hyperparameters and score every vertex.
    Score(ScoreArgs),
    /// Generate synthetic data sets from a scenario file.
    Simulate(SimulateArgs),
    /// Compare score files against a truth table.
    Evaluate(EvaluateArgs),
    /// Run the two-variable blocking model.
    Toy(ToyArgs),
    /// Write permuted copies of a data set.
    Permute(PermuteArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct GraphSource {
    /// Lattice dimensions, e.g. `32x32`.
    #[arg(long, value_name = "RxC")]
    pub lattice: Option<String>,
    /// Edge-list file with one `u v` pair per line.
    #[arg(long, value_name = "FILE")]
    pub edges: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EnumerateArgs {
    #[command(flatten)]
    pub graph: GraphSource,
    /// Number of vertices when the edge list leaves some isolated.
    #[arg(long)]
    pub vertices: Option<usize>,
    /// Count every set partition instead of the graph-respecting ones.
    #[arg(long)]
    pub all: bool,
    /// Write the partitions, one per line, to this file.
    #[arg(long, value_name = "FILE")]
    pub list: Option<PathBuf>,
    /// Largest graph to enumerate.
    #[arg(long, default_value_t = graphmm::partition::DEFAULT_ENUMERATION_CAP)]
    pub cap: usize,
}

#[derive(Args, Debug, Default)]
pub struct ScoreArgs {
    /// Run file (TOML); flags given on the command line take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Group-1 data CSV.
    #[arg(long, value_name = "FILE")]
    pub x: Option<PathBuf>,
    /// Group-2 data CSV.
    #[arg(long, value_name = "FILE")]
    pub y: Option<PathBuf>,
    #[command(flatten)]
    pub graph: GraphSource,
    /// Patch shape on a lattice.
    #[arg(long, value_name = "RxC")]
    pub patch: Option<String>,
    /// Breadth-first radius of the patch on an edge-list graph.
    #[arg(long)]
    pub radius: Option<usize>,
    /// Comma-separated lfdr thresholds.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    /// Hyperparameter file to use instead of estimating.
    #[arg(long, value_name = "FILE")]
    pub hyper: Option<PathBuf>,
    #[arg(long)]
    pub mu0: Option<f64>,
    #[arg(long)]
    pub tau2: Option<f64>,
    #[arg(long)]
    pub delta0: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub p0: Option<f64>,
    /// Estimate the two groups' scale matrices separately.
    #[arg(long)]
    pub separate_scales: bool,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scenario file (TOML).
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub replicates: u64,
    #[arg(long, value_name = "DIR", default_value = "sim")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Truth table with a `null` column.
    #[arg(long, value_name = "FILE")]
    pub truth: PathBuf,
    /// Score files: long-format tables, lfdr tables or `vertex,score` files.
    #[arg(long = "scores", value_name = "FILE", required = true)]
    pub scores: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.05, 0.1, 0.2])]
    pub thresholds: Vec<f64>,
    /// Methods whose scores are local fdrs and get a controlled FDR column.
    #[arg(long = "lfdr-method", value_name = "NAME", default_values_t = ["graphmm".to_string(), "locfdr".to_string()])]
    pub lfdr_methods: Vec<String>,
    /// Output CSV; standard output when absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ToyArgs {
    /// Toy model file (TOML).
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 20)]
    pub replicates: u64,
    /// List sizes at which the curves are reported.
    #[arg(long, value_delimiter = ',', default_values_t = [100, 500, 1000, 1500, 2000])]
    pub sizes: Vec<usize>,
    /// Output CSV; standard output when absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PermuteMode {
    /// Reassign samples to groups at random.
    Labels,
    /// Shuffle vertex positions.
    Vertices,
}

#[derive(Args, Debug)]
pub struct PermuteArgs {
    #[arg(long, value_name = "FILE")]
    pub x: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub y: PathBuf,
    #[arg(long, value_enum)]
    pub mode: PermuteMode,
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR", default_value = "perm")]
    pub out: PathBuf,
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(Failure::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    match cli.command {
        Command::Enumerate(a) => commands::enumerate(a),
        Command::Score(a) => score::run(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Toy(a) => commands::toy(a),
        Command::Permute(a) => commands::permute(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
