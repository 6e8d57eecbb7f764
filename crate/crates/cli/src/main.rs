//! `shapley-r2`: decompose a model's R² into per-feature shares.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 numerical failure.

mod commands;
mod failure;
mod ingest;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "shapley-r2", version, about = "Shapley-value decomposition of R² into per-feature shares")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decompose R² from a CSV of outcomes, predictions and attributions
    /// (columns y, yhat, phi_<feature>..., optional phi0).
    Decompose(DecomposeArgs),
    /// Fit a built-in model, explain it with Shapley values and decompose.
    Explain(ExplainArgs),
    /// Run the uniform-correlation σ_unique simulation grid.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use Σ_f var(y - yhat_shap) as the σ_unique numerator instead of the
    /// summed increase in residual variance.
    #[arg(long)]
    eq7_as_printed: bool,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    input: PathBuf,
    /// Base value φ₀, used only to check additivity.
    #[arg(long, allow_hyphen_values = true)]
    phi0: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Ols,
    Stumps,
}

#[derive(Debug, Args)]
pub struct ShapleyArgs {
    /// Estimate Shapley values by permutation sampling instead of exact
    /// enumeration.
    #[arg(long)]
    sampled: bool,
    /// Orderings per instance when sampling.
    #[arg(long, default_value_t = 1000)]
    permutations: usize,
    /// Seed for permutation sampling and background subsampling.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Keep only this many background rows (drawn with --seed).
    #[arg(long)]
    background_subsample: Option<usize>,
    /// Worker thread cap; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    data: PathBuf,
    /// Outcome column; every other column is a feature.
    #[arg(long)]
    target: String,
    #[arg(long, value_enum, default_value_t = ModelKind::Ols)]
    model: ModelKind,
    /// Boosting rounds for --model stumps.
    #[arg(long, default_value_t = 100)]
    iterations: usize,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    /// Pick the number of boosting rounds whose training R² is closest to
    /// this value.
    #[arg(long)]
    target_r2: Option<f64>,
    /// Upper bound on rounds searched by --target-r2.
    #[arg(long, default_value_t = 5000)]
    max_iterations: usize,
    /// Write the attribution matrix as CSV (readable by `decompose`).
    #[arg(long)]
    emit_shap: Option<PathBuf>,
    #[command(flatten)]
    shapley: ShapleyArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON grid specification; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated correlations.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    rho: Option<Vec<f64>>,
    /// Coefficient configs, ';' between configs and ',' within one,
    /// e.g. "1,1,1;4,1,1".
    #[arg(long, allow_hyphen_values = true)]
    coefficients: Option<String>,
    #[arg(long)]
    n_samples: Option<usize>,
    /// Noise standard deviation; defaults to sqrt(Σβ²) per config.
    #[arg(long)]
    noise_sd: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use permutation sampling instead of the closed-form linear path.
    #[arg(long)]
    sampled: bool,
    #[arg(long, default_value_t = 200)]
    permutations: usize,
    #[arg(long)]
    background_subsample: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Write the long-format grid CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Decompose(args) => commands::run_decompose(&args),
        Command::Explain(args) => commands::run_explain(&args),
        Command::Simulate(args) => commands::run_simulate(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code as u8)
        }
    }
}
