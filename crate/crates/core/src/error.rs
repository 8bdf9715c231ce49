//! Error type shared across the crate.

/// Errors produced by constructors and numerical routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A model or state parameter violates its domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Matrix dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The dense symmetric eigensolver failed to converge.
    #[error("eigensolver failed on {context} (dimension {dim}, max |entry| {max_abs:.3e})")]
    Eigensolver {
        context: &'static str,
        dim: usize,
        max_abs: f64,
    },

    /// A matrix required to be positive (semi)definite is not.
    #[error("matrix not positive definite in {context}: min eigenvalue {min_eigenvalue:.3e}")]
    NotPositiveDefinite {
        context: &'static str,
        min_eigenvalue: f64,
    },

    /// A covariance matrix violates the uncertainty relation.
    #[error("unphysical covariance matrix: {0}")]
    UnphysicalState(String),
}

pub type Result<T> = std::result::Result<T, Error>;
