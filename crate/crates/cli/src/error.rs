use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: {message}")]
    Config { line: usize, message: String },
    #[error(transparent)]
    Core(#[from] equiflow_core::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("cannot resume: configuration hash {found} differs from the run's {expected}")]
    HashMismatch { expected: String, found: String },
    #[error("nothing to resume in {0}")]
    NoCheckpoint(String),
    #[error("run ended with status {0}, not a blow-up")]
    NotBlowup(String),
    #[error("missing diagnostics: {0}")]
    MissingDiagnostics(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn config(line: usize, message: String) -> Self {
        CliError::Config { line, message }
    }
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
    pub fn json(path: &Path, source: serde_json::Error) -> Self {
        CliError::Json { path: path.display().to_string(), source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
