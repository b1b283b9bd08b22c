use std::path::PathBuf;

use kpo_core::KpoError;

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    /// Invalid configuration, anchored at a line and column of the source.
    #[error("{origin}:{line}:{column}: {message}")]
    Config { origin: String, line: usize, column: usize, message: String },

    #[error("{0}")]
    Usage(String),

    /// A solver failed at a named grid point.
    #[error("{point}: {source}")]
    Solver {
        point: String,
        #[source]
        source: KpoError,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("oracle check failed: {0}")]
    OracleMismatch(String),
}

pub type Result<T> = std::result::Result<T, SweepError>;

/// Wraps a solver error with the grid point it came from.
pub(crate) trait AtPoint<T> {
    fn at_point(self, point: impl FnOnce() -> String) -> Result<T>;
}

impl<T> AtPoint<T> for std::result::Result<T, KpoError> {
    fn at_point(self, point: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| SweepError::Solver { point: point(), source })
    }
}
