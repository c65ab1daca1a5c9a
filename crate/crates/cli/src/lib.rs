//! Command-line front end for `dada-core`: configuration loading, seeded
//! experiment runs and file output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod tables;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::FilterFlag;
pub use crate::error::{CliError, CliResult};
use crate::output::Manifest;

#[derive(Debug, Parser)]
#[command(
    name = "dada-kit",
    version,
    about = "Event attribution from data-assimilation model evidence"
)]
pub struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the one in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "DADA_KIT_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub filter: Option<FilterFlag>,
    #[arg(long, global = true)]
    pub ensemble_size: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a trajectory and its observations.
    Simulate,
    /// Observe an existing trajectory file.
    Observe {
        #[arg(long)]
        trajectory: PathBuf,
    },
    /// Evidence of observations under two worlds and the resulting PN.
    Attribute {
        /// Observation file; omit together with --repeat to simulate.
        #[arg(long)]
        obs: Option<PathBuf>,
        #[arg(long)]
        factual: PathBuf,
        #[arg(long)]
        counterfactual: Option<PathBuf>,
        /// Simulate this many factual sequences and assimilate each in both
        /// worlds (counterfactual: the factual model without forcing).
        #[arg(long)]
        repeat: Option<usize>,
    },
    /// Parameter sweep comparing evidence-based and conventional PN.
    Sweep,
    /// ROC and Gini tables from a scores file.
    Roc {
        #[arg(long)]
        scores: PathBuf,
    },
    /// Attractor moments, leading plane and projected densities.
    Attractor,
    /// Scalar AR(1) demonstration of Monte-Carlo tail estimation.
    DemoAr1,
}

/// Runs one command with a thread pool sized by `--workers`.
pub fn run(cli: &Cli) -> CliResult<Manifest> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::config("--workers must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::runtime(e.to_string()))?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: &Cli) -> CliResult<Manifest> {
    match &cli.command {
        Command::Simulate => commands::simulate::simulate(cli),
        Command::Observe { trajectory } => commands::simulate::observe(cli, trajectory),
        Command::Attribute {
            obs,
            factual,
            counterfactual,
            repeat,
        } => commands::attribute::attribute(cli, obs.as_deref(), factual, counterfactual.as_deref(), *repeat),
        Command::Sweep => commands::sweep::sweep(cli),
        Command::Roc { scores } => commands::sweep::roc(cli, scores),
        Command::Attractor => commands::attractor::attractor(cli),
        Command::DemoAr1 => commands::demo::demo_ar1(cli),
    }
}
