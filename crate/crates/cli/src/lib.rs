//! Experiment driver library behind the `pqlab` binary: configuration,
//! CSV emission, the individual studies, and the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod csvio;
pub mod experiments;

use std::fmt;

/// CLI failure classes, mapped to process exit codes:
/// invalid config = 1, solver failure = 2, soundness violation = 3.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Solver(String),
    Soundness(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Soundness(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid config: {m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
            CliError::Soundness(m) => write!(f, "soundness violation: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<pqlab_core::Error> for CliError {
    fn from(e: pqlab_core::Error) -> Self {
        CliError::Solver(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
