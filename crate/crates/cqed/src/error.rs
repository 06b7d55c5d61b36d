use std::path::PathBuf;

use thiserror::Error;

/// Problems reading or writing one of the file formats.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

impl FormatError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FormatError::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        FormatError::Parse { path: path.into(), line, message: message.into() }
    }

    pub fn invalid(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        FormatError::Invalid { path: path.into(), message: message.into() }
    }
}

/// Errors surfaced by the command line, mapped onto exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or inconsistent configuration (exit 2).
    #[error("configuration error: {0}")]
    Config(String),
    /// Some work items failed or a timeout hit (exit 1).
    #[error("{0}")]
    Partial(String),
    /// A computation failed outright (exit 1).
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Partial(_) | CliError::Runtime(_) => 1,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Io { .. } => CliError::Runtime(e.into()),
            _ => CliError::Config(e.to_string()),
        }
    }
}
