use std::process::ExitCode;

use thiserror::Error;

/// Failure of a command, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),
    /// Missing, malformed or unwritable data.
    #[error("data error: {0}")]
    Data(String),
    /// Estimation could not produce any usable result.
    #[error("estimation failed: {0}")]
    Estimation(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Estimation(_) => 3,
        })
    }
}

impl From<spinradar::Error> for CliError {
    fn from(e: spinradar::Error) -> Self {
        if e.is_estimation_failure() {
            CliError::Estimation(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

/// Attach a path or action to an I/O-ish failure and file it as a data error.
pub trait DataContext<T> {
    fn data(self, what: impl FnOnce() -> String) -> CliResult<T>;
}

impl<T, E: std::fmt::Display> DataContext<T> for Result<T, E> {
    fn data(self, what: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|e| CliError::Data(format!("{}: {e}", what())))
    }
}

pub fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}
