use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("config key {key}: {message}")]
    Constraint { key: String, message: String },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Solver(#[from] deadoil_core::Error),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn constraint(key: &str, message: impl Into<String>) -> Self {
        AppError::Constraint {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AppError::Io { .. } => "io",
            AppError::Parse { .. } | AppError::Constraint { .. } | AppError::Format(_) => "config",
            AppError::Solver(e) if e.is_nonconvergence() => "nonconvergence",
            AppError::Solver(_) => "invalid_argument",
            AppError::Verification(_) => "verification",
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            AppError::Solver(e) if e.is_nonconvergence() => ExitCode::NonConvergence,
            AppError::Verification(_) => ExitCode::VerificationFailed,
            _ => ExitCode::ConfigError,
        }
    }
}

/// Process exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    NonConvergence = 2,
    ConfigError = 3,
    VerificationFailed = 4,
}
