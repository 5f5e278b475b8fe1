//! Front end for `stein-density-core`: JSON configs, parallel sampling,
//! CSV output and the `stein-density` command.
//!
//! Exit codes: 0 success, 2 config or validation failure, 3 numerical
//! failure, 4 existence rejected.

pub mod cli;
pub mod config;
pub mod output;
pub mod parallel;
pub mod pipeline;

use stein_density_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("decomposition failed validation:\n{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Rejected(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Validation(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Rejected(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let text = e.to_string();
        match e.root() {
            Error::Syntax { .. } | Error::Dimension { .. } | Error::InvalidInput(_) | Error::Precondition(_) | Error::Degenerate { .. } => {
                CliError::Config(text)
            }
            Error::Existence { .. } => CliError::Rejected(text),
            _ => CliError::Numerical(text),
        }
    }
}
