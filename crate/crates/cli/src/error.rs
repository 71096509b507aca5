use std::fmt::Display;
use std::path::Path;
use thiserror::Error;

/// Failure modes of the binary, one variant per process exit code.
/// Success is 0; [`CliError::Config`] exits 1, [`CliError::Data`] 2 and
/// [`CliError::Empty`] 3.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unusable configuration or invocation. Raised before any output is
    /// touched.
    #[error("config error: {0}")]
    Config(String),
    /// An input file could not be read or did not parse, or an output
    /// could not be written.
    #[error("data error: {0}")]
    Data(String),
    /// The run was structurally fine but produced nothing to report on.
    #[error("{0}")]
    Empty(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Empty(_) => 3,
        }
    }

    /// Data error carrying the offending path.
    pub fn data(path: &Path, err: impl Display) -> CliError {
        CliError::Data(format!("{}: {err}", path.display()))
    }
}
