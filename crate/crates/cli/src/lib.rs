//! Configuration loading, experiment dispatch and report emission for the
//! `dynbc` command-line tool.

pub mod config;
pub mod experiments;
pub mod report;

use std::path::Path;

use thiserror::Error;

pub use config::{load_config, parse_config, Experiment, RawConfig, RunConfig};
pub use report::{Outcome, RunReport};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("cannot write outputs: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) | CliError::Io(_) => 3,
        }
    }
}

/// Exit status for a finished run.
pub fn exit_code(result: &Result<RunReport, CliError>) -> u8 {
    match result {
        Ok(r) if r.pass => 0,
        Ok(_) => 1,
        Err(e) => e.exit_code(),
    }
}

/// Loads `config_path` for the experiment `name`, runs it and writes the
/// artifacts into `out_dir`.
pub fn execute(name: &str, config_path: &Path, out_dir: &Path, seed: u64) -> Result<RunReport, CliError> {
    let src = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Config(format!("{}: cannot read: {e}", config_path.display())))?;
    let config = RunConfig::for_subcommand(&src, &config_path.display().to_string(), name)?;
    let outcome = experiments::run(&config, seed)?;
    outcome.write(out_dir)?;
    Ok(outcome.report)
}
