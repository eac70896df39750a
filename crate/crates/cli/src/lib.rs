//! Batch front-end: JSON configuration, command dispatch and CSV/JSON
//! output for the `periodica` library.

pub mod checks;
pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

pub use commands::{run, Artifact, Command};
pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Library(#[from] periodica::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Every error is a configuration or input problem.
    pub fn exit_code(&self) -> i32 {
        2
    }
}
