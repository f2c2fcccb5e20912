mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "tricolor", version, about = "Vector-coloring and rounding experiments on 3-colorable graphs")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// JSON experiment config; explicit flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo sample count.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub slack_eps_dot: Option<f64>,
    #[arg(long, global = true)]
    pub slack_mass_floor: Option<f64>,
    #[arg(long, global = true)]
    pub slack_prune_r: Option<f64>,
    #[arg(long, global = true)]
    pub slack_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub slack_spread: Option<f64>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Graph file plus an optional vector file.
#[derive(Args, Debug, Clone)]
pub struct Input {
    /// Graph in the `p n m` / `e u v` / `c v col` text format.
    #[arg(long)]
    pub graph: PathBuf,
    /// Vectors as JSON (an SDP solution or a bare vector table). Defaults
    /// to the planted simplex when the graph file carries colors, else a
    /// low-rank SDP solve.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ThresholdArgs {
    /// Explicit rounding threshold; overrides the policy.
    #[arg(long, allow_negative_numbers = true)]
    pub t: Option<f64>,
    #[arg(long, value_enum)]
    pub policy: Option<Policy>,
    /// Inefficiency parameter c.
    #[arg(long)]
    pub c: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Kappa,
    Inefficient,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundMethod {
    Kms,
    KmsPrime,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyzeKind {
    Failure,
    Covers,
    Packing,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpMethod {
    Lowrank,
    Full,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample a planted 3-colorable graph.
    Generate {
        #[arg(long)]
        n: Option<usize>,
        /// Expected degree.
        #[arg(long, conflicts_with = "p")]
        degree: Option<f64>,
        /// Cross-class edge probability.
        #[arg(long)]
        p: Option<f64>,
        /// Class weights `a,b,c`.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        weights: Option<Vec<f64>>,
    },
    /// Solve the vector 3-coloring relaxation.
    SolveSdp {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 3.0)]
        kappa: f64,
        #[arg(long, value_enum, default_value_t = SdpMethod::Lowrank)]
        method: SdpMethod,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 400)]
        max_iter: usize,
    },
    /// One rounding draw.
    Round {
        #[arg(value_enum)]
        method: RoundMethod,
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        threshold: ThresholdArgs,
    },
    /// Monte Carlo analysis of KMS' failure, vertex covers or packings.
    Analyze {
        #[arg(value_enum)]
        kind: AnalyzeKind,
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        threshold: ThresholdArgs,
        /// Restrict to one vertex.
        #[arg(long)]
        vertex: Option<usize>,
    },
    /// Second-level pruning and extraction (needs strict vectors).
    Walk2 {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        threshold: ThresholdArgs,
        /// Center vertex; chosen by score when absent.
        #[arg(long)]
        vertex: Option<usize>,
        /// Write the pruned context as a JSON checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Resume from a checkpoint instead of sampling and pruning.
        #[arg(long, conflicts_with = "checkpoint")]
        resume: Option<PathBuf>,
    },
    /// Third-level sets and the win-win extraction (needs strict vectors).
    Walk3 {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        threshold: ThresholdArgs,
        #[arg(long)]
        c_prime: Option<f64>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, conflicts_with = "checkpoint")]
        resume: Option<PathBuf>,
    },
    /// Parameter exponents, or a grid search with `--optimize`.
    Params {
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        c_prime: Option<f64>,
        #[arg(long)]
        optimize: bool,
        /// Grid points per axis for `--optimize`.
        #[arg(long, default_value_t = 40)]
        grid: usize,
    },
    /// Full coloring driver.
    Color {
        #[command(flatten)]
        input: Input,
        /// Write the event log as JSON.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Experiment harness over degrees and seeds.
    Bench {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        degrees: Option<Vec<f64>>,
        /// Number of seeds, starting at `--seed`.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        dry_run: bool,
        #[arg(long)]
        timings: bool,
    },
}

fn main() -> ExitCode {
    // usage errors exit 1 so that 2 always means a failed precondition
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
