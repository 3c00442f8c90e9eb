use std::path::PathBuf;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },
    #[error("matrix is singular even after ridge regularization")]
    Singular,
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("projection is rank deficient; degenerate columns {columns:?}")]
    RankDeficient { columns: Vec<usize> },
    #[error("all columns are degenerate")]
    AllColumnsDegenerate,
    #[error("reduced-rank weights are zero; the projection would annihilate the signal")]
    ZeroWeights,
    #[error("cross-correlation vector is zero")]
    ZeroCrossCorrelation,
    #[error("adaptive filter diverged at iteration {iteration}")]
    Divergence { iteration: u64 },
    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),
    #[error("index {index} out of range (horizon {horizon})")]
    OutOfRange { index: usize, horizon: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Broad failure classes, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Math,
    Io,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::OutOfRange { .. } => ErrorCategory::Config,
            Error::Io { .. } => ErrorCategory::Io,
            _ => ErrorCategory::Math,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
