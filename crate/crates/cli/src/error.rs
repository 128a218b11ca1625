use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("missing parameter `{0}`")]
    Missing(&'static str),
    #[error("seed is required for randomized runs; pass --seed or set \"seed\" in the config")]
    MissingSeed,
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
}

/// Machine-readable error written to stderr.
#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Missing(_) => "missing-parameter",
            CliError::MissingSeed => "missing-seed",
            CliError::Invalid(_) => "invalid-parameters",
            CliError::Io { .. } => "io",
            CliError::Format(_) => "format",
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ErrorReport {
            error: self.kind(),
            message: self.to_string(),
        })
        .expect("plain strings serialize")
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Wraps a core error as a precondition failure.
pub fn invalid<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Invalid(e.to_string())
}
