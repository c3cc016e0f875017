//! Library side of the `sce` binary: scenario parsing, the subcommands and
//! deterministic output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use config::Scenario;
use error::CliError;
use output::Context;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    MwVerify,
    RevivalScan,
    Floquet,
    FidelityLr,
    Singular,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::MwVerify => "mw-verify",
            Command::RevivalScan => "revival-scan",
            Command::Floquet => "floquet",
            Command::FidelityLr => "fidelity-lr",
            Command::Singular => "singular",
        }
    }
}

/// Parses `text`, resolves the seed and runs `cmd`, writing into `out_dir`.
pub fn run_scenario(cmd: Command, text: &str, out_dir: PathBuf, seed: Option<u64>) -> Result<(), CliError> {
    let scenario = Scenario::parse(text).map_err(CliError::Config)?;
    let seed = seed.or(scenario.seed).unwrap_or(0);
    let mut notes = Vec::new();
    if cmd == Command::FidelityLr {
        notes.push(commands::fidelity::WINDOW_NOTE.to_string());
    }
    let ctx = Context { command: cmd.name(), seed, resolved: scenario.resolved(), out_dir, notes };
    match cmd {
        Command::MwVerify => commands::mw_verify(&scenario, &ctx),
        Command::RevivalScan => commands::revival_scan(&scenario, &ctx),
        Command::Floquet => commands::floquet(&scenario, &ctx),
        Command::FidelityLr => commands::fidelity_lr(&scenario, &ctx),
        Command::Singular => commands::singular(&scenario, &ctx),
    }
}
