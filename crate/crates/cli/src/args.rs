use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bopp::transform::DEFAULT_PROBE_BUDGET;
use bopp_bench::Method;

/// Marginal MAP optimization of probabilistic programs.
#[derive(Debug, Parser)]
#[command(name = "bopp", version, about, propagate_version = true)]
pub struct Cli {
    /// Log verbosity; repeat for more detail. RUST_LOG overrides it.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize a model's θ and stream one record per iteration.
    Optimize(OptimizeArgs),
    /// Run BOPP alone on a benchmark model over several seeded runs.
    Benchmark(CompareArgs),
    /// Compare BOPP against PMMH at equal evidence-evaluation budgets.
    Compare(CompareArgs),
    /// Check a model's optimization variables against the restrictions.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self, streaming: bool) -> &'static str {
        match (self, streaming) {
            (Format::Csv, _) => "csv",
            (Format::Json, true) => "jsonl",
            (Format::Json, false) => "json",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Registered model id.
    #[arg(short, long, required_unless_present = "model_config")]
    pub model: Option<String>,

    /// JSON file with `model` and/or `options` for parameterized models.
    #[arg(long, value_name = "PATH")]
    pub model_config: Option<PathBuf>,

    /// Override the number of time steps of sequence models.
    #[arg(long)]
    pub steps: Option<usize>,

    /// Seed for synthetic data generation.
    #[arg(long)]
    pub data_seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file. Without it, results go to BOPP_OUTPUT_DIR or stdout.
    #[arg(short, long, value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// Directory for default-named output files.
    #[arg(long, env = "BOPP_OUTPUT_DIR", value_name = "DIR")]
    pub output_dir: Option<PathBuf>,

    /// Record wall-clock times as 0 so that seeded runs are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Number of BO iterations (records emitted).
    #[arg(long, visible_alias = "iterations", default_value_t = 50)]
    pub iters: usize,

    /// Particles per evidence estimate.
    #[arg(long, default_value_t = 100)]
    pub particles: usize,

    /// Initial prior draws.
    #[arg(long, default_value_t = 5)]
    pub n_init: usize,

    /// Master seed; drawn from OS entropy when absent.
    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Comma-separated methods: bopp, pmmh-lmh, pmmh-rmh.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub methods: Option<Vec<Method>>,

    /// Evidence evaluations per run.
    #[arg(long, visible_alias = "iters", default_value_t = 50)]
    pub budget: usize,

    #[arg(long, default_value_t = 100)]
    pub particles: usize,

    #[arg(long, default_value_t = 1)]
    pub runs: usize,

    #[arg(long, default_value_t = 5)]
    pub n_init: usize,

    /// PMMH random-walk scale in prior-range units.
    #[arg(long, default_value_t = 0.1)]
    pub rw_scale: f64,

    /// Worker threads; 0 uses the available parallelism.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,

    /// Base seed; run r uses seed + r. Drawn from OS entropy when absent.
    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Unconditioned executions to probe.
    #[arg(long, default_value_t = DEFAULT_PROBE_BUDGET)]
    pub probes: usize,

    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.trim().parse().map_err(|e: bopp_bench::BenchError| e.to_string())
}
