//! Orchestration for the `wipcrit` command-line tool.
//!
//! Exit codes: 0 success, 2 configuration error, 3 invariant or oracle
//! failure, 4 statistical-test failure, 1 I/O trouble.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{cmd_classify, cmd_donsker, cmd_estimate, cmd_sweep_k, cmd_verify_projections, RunOutcome};
pub use config::RunConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    Config(String),
    Invariant(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Invariant(m) => write!(f, "invariant violated: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<wipcrit::Error> for CliError {
    fn from(e: wipcrit::Error) -> Self {
        match e {
            wipcrit::Error::InvariantViolated(_) => CliError::Invariant(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
