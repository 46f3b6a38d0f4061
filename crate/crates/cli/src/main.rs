//! `fedscen`: train federated or centralized scenario generators, sweep
//! federation settings, score scenario sets, and synthesize input fleets.
//!
//! Exit codes: 0 on success, 1 on runtime failures (training, evaluation,
//! I/O mid-run), 2 on bad invocations or configuration.

mod commands;
mod config;
mod plots;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Failure classes mapped to process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad invocation or configuration: exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Failure inside an otherwise valid run: exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "fedscen", version, about = "Renewable power scenario generation with federated GANs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one experiment from a TOML config and write its artifacts.
    Run {
        /// Experiment configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also render SVG plots next to the plot CSVs.
        #[arg(long)]
        render_plots: bool,
    },
    /// Train the federated method across a grid of federation settings.
    Sweep {
        /// Experiment configuration file (method must be "fed_lsgan").
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sync intervals to sweep, comma-separated.
        #[arg(long, value_delimiter = ',', default_value = "50,100,200")]
        sync_intervals: Vec<usize>,
        /// Client fractions to sweep, comma-separated.
        #[arg(long, value_delimiter = ',', default_value = "0.5,1.0")]
        client_fractions: Vec<f64>,
    },
    /// Score a generated scenario CSV against a real one.
    Evaluate {
        /// Real scenarios, one per row, no header.
        #[arg(long)]
        real: PathBuf,
        /// Generated scenarios, one per row, no header.
        #[arg(long)]
        generated: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Cluster count for centroid-matched MAE/RMSE.
        #[arg(long, default_value_t = 9)]
        k_clusters: usize,
        /// CRPS lead indices, comma-separated; default all.
        #[arg(long, value_delimiter = ',')]
        crps_leads: Vec<usize>,
        /// Seed for the clustering step.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a synthetic fleet of site CSVs.
    Synth {
        /// Fleet name; files land in `<out>/<fleet>/<site_id>.csv`.
        #[arg(long, default_value = "fleet")]
        fleet: String,
        /// Number of sites.
        #[arg(long, default_value_t = 4)]
        n_sites: usize,
        /// Days of 5-minute data per site.
        #[arg(long, default_value_t = 400)]
        days: usize,
        /// Site technology.
        #[arg(long, value_enum, default_value_t = commands::synth::Kind::Solar)]
        kind: commands::synth::Kind,
        /// Nameplate capacity in MW.
        #[arg(long, default_value_t = 5.0)]
        capacity_mw: f64,
        /// Cross-site coupling in [0, 1].
        #[arg(long, default_value_t = 0.6)]
        coupling: f64,
        /// Data root directory.
        #[arg(long, default_value = "data")]
        out: PathBuf,
        /// Seed for the synthetic processes.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out, render_plots } => {
            commands::run::run(&config, seed, out, render_plots)
        }
        Command::Sweep { config, seed, out, sync_intervals, client_fractions } => {
            commands::sweep::sweep(&config, seed, out, &sync_intervals, &client_fractions)
        }
        Command::Evaluate { real, generated, out, k_clusters, crps_leads, seed } => {
            commands::evaluate::evaluate(&real, &generated, out.as_deref(), k_clusters, &crps_leads, seed)
        }
        Command::Synth { fleet, n_sites, days, kind, capacity_mw, coupling, out, seed } => {
            commands::synth::synth(&fleet, n_sites, days, kind, capacity_mw, coupling, &out, seed)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
