//! `ris-urllc`: experiment driver for RIS-aided URLLC power control.
//!
//! Exit status is 0 on success (infeasible decisions included), 1 for a bad
//! configuration and 2 for numerical or I/O failures at run time.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ScenarioConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Numeric(#[from] ris_urllc::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numeric(_) | CliError::Io { .. } => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ris-urllc", version, about = "Power control experiments for RIS-aided URLLC links")]
struct Cli {
    /// TOML scenario file; built-in reference values fill anything missing.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `monte_carlo.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `monte_carlo.samples`.
    #[arg(long, global = true)]
    samples: Option<u64>,
    /// Overrides `monte_carlo.workers`; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Directory for CSV output.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Comma-separated motion directions in degrees, e.g. `0,45,-45`.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    psi: Option<Vec<f64>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Power decision for a device at one floor position (JSON, one line per Ψ).
    Decide {
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, allow_negative_numbers = true)]
        y: f64,
    },
    /// Transmit power over the floor grid, one CSV per Ψ.
    Heatmap,
    /// Bound-based versus Monte Carlo optimal power along the elevation sweep.
    Sweep,
    /// Runs the built-in check battery and prints a JSON report.
    Validate,
    /// Builds or refreshes the fading quantile table.
    QuantileTable,
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.monte_carlo.seed = seed;
    }
    if let Some(n) = cli.samples {
        cfg.monte_carlo.samples = n;
    }
    if let Some(w) = cli.workers {
        cfg.monte_carlo.workers = w;
    }
    if let Some(psi) = &cli.psi {
        cfg.psi_deg = psi.clone();
    }
    for w in cfg.validate()? {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Decide { x, y } => commands::decide(&cfg, *x, *y),
        Command::Heatmap => commands::heatmap(&cfg, &cli.out),
        Command::Sweep => commands::sweep(&cfg, &cli.out),
        Command::Validate => commands::validate(&cfg),
        Command::QuantileTable => commands::quantile_table(&cfg, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
