//! Library surface of the `lossq` CLI: config parsing/echo, command
//! execution, and artifact rendering. The binary in `main.rs` is a thin
//! wrapper so integration tests can drive everything in-process.

pub mod config;
pub mod emit;
pub mod execute;

use std::fmt;

/// CLI-level error with a documented exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Config parse or validation failure (exit 2).
    Config(String),
    /// Error propagated from the analysis engine (exit 2, 3 or 5).
    Core(lossq_core::Error),
    /// Filesystem problem reading the config or writing artifacts (exit 2).
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<lossq_core::Error> for CliError {
    fn from(e: lossq_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    /// Documented exit codes: 1 usage, 2 validation, 3 regime,
    /// 4 comparison-fail, 5 runaway simulation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => execute::EXIT_VALIDATION,
            CliError::Core(e) => match e {
                lossq_core::Error::Regime(_) => execute::EXIT_REGIME,
                lossq_core::Error::RunawaySimulation(_) => execute::EXIT_RUNAWAY,
                _ => execute::EXIT_VALIDATION,
            },
        }
    }
}
