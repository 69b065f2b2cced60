//! Front end for `cubic`: experiment files, figure bundles, verification
//! suites and trajectory CSV output.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod figures;

use thiserror::Error;

pub use commands::{run, Cli, Command};
pub use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("verification failed: {0}")]
    Verify(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verify(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
        }
    }
}

impl From<cubic_core::Error> for CliError {
    fn from(e: cubic_core::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
