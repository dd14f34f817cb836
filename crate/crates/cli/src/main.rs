use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::Config;

#[derive(Parser)]
#[command(name = "riskvol", about = "Forecast stock volatility from annual-report risk factors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set experiment.fusion=mkl`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output directory; overrides paths.output_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Extract and tokenize Risk Factors sections listed in the manifest.
    Ingest,
    /// Compute volatility labels and market features per report.
    Labels,
    /// Run the configured experiment or the scheme grid.
    Evaluate,
    /// Year-by-year centroid similarity of the feature space.
    Drift,
    /// General, sector-specific and sector-agnostic results per sector.
    Sectors,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let Some(path) = cli.config else {
        anyhow::bail!("--config is required");
    };
    let mut cfg = Config::load(&path, &cli.overrides)?;
    if let Some(out) = cli.out {
        cfg.paths.output_dir = out;
    }
    match cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Labels => commands::labels(&cfg),
        Command::Evaluate => commands::evaluate(&cfg),
        Command::Drift => commands::drift(&cfg),
        Command::Sectors => commands::sectors(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
