use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value produced at step {step}")]
    NonFinite { step: usize },

    #[error("zero pivot at row {row} of a linear solve")]
    ZeroPivot { row: usize },

    #[error("matrix is not positive definite (row {row})")]
    NotPositiveDefinite { row: usize },

    #[error("nonlinear solve did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("multistep history holds {have} entries, {need} required")]
    InsufficientHistory { have: usize, need: usize },

    #[error("scheme has finished all {0} steps")]
    Finished(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Errors that stem from a corrupted value reaching the solver rather
    /// than from misuse of the API.
    pub fn is_numerical_breakdown(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::ZeroPivot { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::NoConvergence { .. }
        )
    }
}
