//! `windcast` command-line entry point.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a configuration
//! or usage error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use windcast::Method;

use commands::Context;
use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "windcast", version, about = "Periodic SVARX-TARCHX wind speed forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for simulation and origin sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Shrinkage method.
    #[arg(long, global = true, value_enum)]
    method: Option<MethodArg>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores); results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Maximum forecast horizon in steps.
    #[arg(long, global = true)]
    horizon: Option<usize>,
    /// Number of forecast origins.
    #[arg(long, global = true)]
    origins: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a panel from the configured truth and write panel.csv.
    Simulate,
    /// Fit the model and benchmarks on the training rows.
    Fit,
    /// Forecast from sampled holdout origins.
    Forecast {
        /// Model files or benchmark names (persistence, ar, var).
        models: Vec<String>,
    },
    /// Score models on sampled holdout origins.
    Evaluate {
        /// Model files or benchmark names (persistence, ar, var).
        models: Vec<String>,
    },
    /// Summarize the last evaluation as report.md.
    Report,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Lasso,
    #[value(name = "elastic_net", alias = "elastic-net")]
    ElasticNet,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Lasso => Method::Lasso,
            MethodArg::ElasticNet => Method::ElasticNet,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        seed: cli.seed,
        method: cli.method.map(Method::from),
        out: cli.out.clone(),
        workers: cli.workers,
        horizon: cli.horizon,
        origins: cli.origins,
    };
    let config = match RunConfig::load(cli.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build_global()
    {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let ctx = Context::new(config);
    let result = match &cli.command {
        Command::Simulate => commands::simulate(&ctx),
        Command::Fit => commands::fit(&ctx),
        Command::Forecast { models } => commands::forecast(&ctx, models),
        Command::Evaluate { models } => commands::evaluate_cmd(&ctx, models),
        Command::Report => commands::report(&ctx),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
