use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A line of a line-delimited input could not be parsed.
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Input parsed but violates a data-model invariant.
    #[error("{0}")]
    Validation(String),

    /// Binary file with a bad magic, truncated section or inconsistent tables.
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("embedding `{key}` has {found} components, expected {expected}")]
    DimensionMismatch {
        key: String,
        expected: usize,
        found: usize,
    },

    #[error("{} embedding key(s) missing: {}", .0.len(), .0.join(", "))]
    MissingEmbeddings(Vec<String>),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Two inputs that must agree (query sets, metric sets) do not.
    #[error("mismatch: {0}")]
    Mismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Short, stable category name used by the CLI's one-line error output.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
            Error::Format { .. } => "format",
            Error::DimensionMismatch { .. } => "dimension",
            Error::MissingEmbeddings(_) => "missing-embeddings",
            Error::Config(_) => "config",
            Error::Mismatch(_) => "mismatch",
        }
    }
}
