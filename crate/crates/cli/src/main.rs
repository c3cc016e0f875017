use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use sce_cli::error::CliError;
use sce_cli::{run_scenario, Command};

/// Semiclassical coherent-state experiments.
#[derive(Debug, Parser)]
#[command(name = "sce", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads; falls back to SCE_THREADS, then all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let threads = cli
        .threads
        .or_else(|| std::env::var("SCE_THREADS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(0);
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        log::warn!("thread pool already initialised: {e}");
    }
    let result = std::fs::read_to_string(&cli.config)
        .map_err(|e| CliError::Config(format!("{}: {e}", cli.config.display())))
        .and_then(|text| run_scenario(cli.command, &text, cli.out, cli.seed));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sce: {e}");
            e.code()
        }
    }
}
