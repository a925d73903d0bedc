//! Command-line driver: configuration, subcommands and exports.
pub mod commands;
pub mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "convint",
    version,
    about = "Convex integration with intermittent jets on the 3-torus"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides noise.seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for field operations.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides run.q_max.
    #[arg(long, global = true)]
    pub qmax: Option<usize>,
    /// Overrides grid.n_per_axis.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Overrides noise.dt.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the parameter constraints of an exact schedule.
    ParamsCheck,
    /// Build a jet family and run its identity and scaling battery.
    Jets,
    /// Run the construction and write ledger, report and checkpoints.
    Iterate,
    /// Weak-form residual and convergence report from checkpoints.
    Verify,
    /// Two-energy consistency experiment.
    Consistency,
}

/// Loads the config, applies flag overrides and runs the command; returns the exit code.
pub fn run(cli: &Cli) -> i32 {
    match try_run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn try_run(cli: &Cli) -> config::CliResult<i32> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| config::CliError::Config("--config is required".into()))?;
    let mut cfg = config::RunConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.noise.seed = s;
    }
    if let Some(q) = cli.qmax {
        cfg.run.q_max = q;
    }
    if let Some(n) = cli.grid {
        cfg.grid.n_per_axis = n;
    }
    if let Some(dt) = cli.dt {
        cfg.noise.dt = dt;
    }
    cfg.validate()?;
    if let Some(w) = cli.workers {
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build_global();
    }
    match cli.command {
        Command::ParamsCheck => commands::params_check(&cfg, &cli.out),
        Command::Jets => commands::jets(&cfg, &cli.out),
        Command::Iterate => commands::iterate(&cfg, &cli.out),
        Command::Verify => commands::verify(&cfg, &cli.out),
        Command::Consistency => commands::consistency(&cfg, &cli.out),
    }
}
