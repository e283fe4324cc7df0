//! `jsqd`: batch experiments for the JSQ(d) supermarket model.
//!
//! Exit codes: 0 on success, 2 for an invalid config, 3 when a self-test
//! threshold is missed, 1 for anything else.

mod config;
mod error;
mod experiments;
mod output;
mod plot;
mod selftest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

/// Environment variable holding the worker thread count.
const WORKERS_ENV: &str = "JSQD_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "jsqd",
    version,
    about = "Experiments for the JSQ(d) supermarket model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Turn a results.json into long-format plot data.
    PlotData {
        results: PathBuf,
        /// Defaults to plot_data.csv next to the results file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quick built-in consistency checks.
    Selftest,
}

fn init_workers() -> Result<()> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let workers: usize = value.parse().ok().filter(|&w| w > 0).ok_or_else(|| {
        CliError::Config(format!(
            "{WORKERS_ENV} must be a positive integer, got {value:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn run_experiment(path: &Path) -> Result<()> {
    let (cfg, bytes) = ExperimentConfig::load(path)?;
    log::info!("running {:?} into {}", cfg.kind, cfg.output_dir.display());
    let results = experiments::run(&cfg);
    let manifest = output::write_artifacts(&cfg, &bytes, &results)?;
    let failures = results.failures();
    for f in &manifest.files {
        println!("wrote {}", cfg.output_dir.join(&f.name).display());
    }
    if failures > 0 {
        println!("{failures} grid point(s) failed or missed a threshold");
        if cfg.kind.is_selftest() {
            return Err(CliError::SelfTest { failed: failures });
        }
    }
    Ok(())
}

fn plot_data(results: &Path, out: Option<PathBuf>) -> Result<()> {
    let parsed = plot::load_results(results)?;
    let rows = plot::plot_rows(&parsed);
    let out = out.unwrap_or_else(|| results.with_file_name("plot_data.csv"));
    plot::write_plot_csv(&rows, &out)?;
    println!("wrote {} ({} rows)", out.display(), rows.len());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = init_workers().and_then(|()| match &cli.command {
        Command::Run { config } => run_experiment(config),
        Command::PlotData { results, out } => plot_data(results, out.clone()),
        Command::Selftest => selftest::run(),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
