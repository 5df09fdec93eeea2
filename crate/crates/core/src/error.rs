use thiserror::Error;

/// Errors raised by the solver library.
///
/// Non-convergence of an iterative method is *not* an error: it is reported
/// through the corresponding report type so callers can inspect the history.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: expected {expected} points, found {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("stencil construction failed: {0}")]
    Stencil(String),

    #[error(
        "sparse factorization hit a singular pivot at step {step} (|pivot| = {pivot:.3e}, threshold {threshold:.3e})"
    )]
    SingularPivot { step: usize, pivot: f64, threshold: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
