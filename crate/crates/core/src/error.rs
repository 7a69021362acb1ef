//! Error type shared by all modules.

use thiserror::Error;

/// Errors produced by construction, evaluation, and integration routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Shapes or bond dimensions do not line up.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// An argument lies outside the object's domain (interval bounds,
    /// unordered insertion points, mismatched intervals, singular gauges).
    #[error("domain error: {0}")]
    Domain(String),

    /// An integrator could not reach the requested tolerance within its
    /// step budget. Carries the error estimate it did achieve.
    #[error("accuracy error: achieved {achieved:e}, requested {requested:e}")]
    Accuracy { achieved: f64, requested: f64 },

    /// A size guard was exceeded (dense assembly, grid sizes).
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Parameters fail a structural validation (bad permutations,
    /// non-orthonormal subspace states, malformed configs).
    #[error("validation error: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
