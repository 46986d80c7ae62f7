use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = QscanError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum QscanError {
    #[error(transparent)]
    Core(#[from] qscan_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Grammar violation at a 1-based line.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: position {pos} on {chrom} is not after the previous position {prev}")]
    Ordering {
        line: usize,
        chrom: String,
        pos: u64,
        prev: u64,
    },
    #[error("{0}")]
    Format(String),
    #[error("unknown column '{name}'; available: {available}")]
    UnknownColumn { name: String, available: String },
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Sampling(String),
    #[error("{0}")]
    Placement(String),
}

impl QscanError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Self::Parse {
            line,
            message: message.into(),
        }
    }

    /// Short machine-readable class for command-line error lines.
    pub fn class(&self) -> &'static str {
        match self {
            Self::Core(e) => e.class(),
            Self::Io { .. } => "io",
            Self::Parse { .. } => "parse",
            Self::Ordering { .. } => "ordering",
            Self::Format(_) => "format",
            Self::UnknownColumn { .. } => "unknown-column",
            Self::Config(_) => "config",
            Self::Sampling(_) => "sampling",
            Self::Placement(_) => "placement",
        }
    }
}
