//! `evapprox`: build composite e-variables and certify them from the command line.
//!
//! Exit codes: 0 all checks pass, 2 a certified property failed (or a
//! counterexample demonstrated a violation), 3 configuration error, 1 any
//! other runtime failure.

mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Format;

#[derive(Parser, Debug)]
#[command(name = "evapprox", version, about = "Composite e-variables from per-point e-variables, numerically certified")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the net/estimator conditions behind a family's factor.
    CheckConditions(CommonArgs),
    /// Sweep a composite over a parameter grid and certify sup E_θ[e] <= 1.
    Certify(CertifyArgs),
    /// Exhibit a violation: the Poisson MLE estimator, or spikes with C = 1.
    Counterexample(CounterexampleArgs),
    /// List family ids with their default net, estimator and factor.
    ListFamilies(OutputArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct OutputArgs {
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Family id; see `list-families`.
    #[arg(long)]
    pub family: Option<String>,
    /// JSON run configuration. Flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tie half-width of the r^ε estimator and bump ε of interpolated mode.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Normal-mean net scale.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Sample size.
    #[arg(long)]
    pub n: Option<u32>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Spikes,
    BumpSpikes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Discrete,
    Interpolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    ExactSum,
    Quadrature,
    MonteCarlo,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub suite: Option<SuiteArg>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Override the factor C (must be >= 1).
    #[arg(long)]
    pub factor: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Monte Carlo sample count.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CounterexampleKind {
    /// Poisson with the maximum likelihood estimator on {0, 1, 2, ...}.
    Mle,
    /// The spike suite with the factor forced to 1.
    Spike,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CounterexampleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Defaults to `mle` for poisson and `spike` otherwise.
    #[arg(long, value_enum)]
    pub kind: Option<CounterexampleKind>,
    /// Poisson rate; repeat for several.
    #[arg(long)]
    pub lambda: Vec<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { run::EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::CheckConditions(a) => run::check_conditions(&a),
        Command::Certify(a) => run::certify(&a),
        Command::Counterexample(a) => run::counterexample(&a),
        Command::ListFamilies(a) => run::list_families(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
