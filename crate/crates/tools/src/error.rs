use std::path::Path;

use crate::format::FormatError;

/// Command failure, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad parameters, arguments or input files. Exit code 2.
    #[error("{0}")]
    Validation(String),
    /// Reading or writing a file failed. Exit code 3.
    #[error("{0}")]
    Io(String),
    /// The protocol broke one of its own guarantees. Exit code 4.
    #[error("{0}")]
    Protocol(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
            CliError::Protocol(_) => 4,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    pub fn format(path: &Path, err: FormatError) -> Self {
        CliError::Validation(format!("{}: {err}", path.display()))
    }
}

impl From<blob_core::error::Error> for CliError {
    fn from(e: blob_core::error::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
