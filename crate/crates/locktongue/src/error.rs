//! Error type shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("base frequency mismatch: {left} vs {right}")]
    BaseMismatch { left: f64, right: f64 },

    /// Lemma requires a nonzero exponential weight; the mean-free case is
    /// handled by the caller with a plain antiderivative.
    #[error("exponential weight C must be nonzero (secular term)")]
    SecularTerm,

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("step size underflow at t = {t} (h = {h:.3e}); problem too stiff for this tolerance")]
    Stiffness { t: f64, h: f64 },

    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("wronskian decomposition failed: {0}")]
    Decomposition(String),

    #[error("compatibility condition failed: {0}")]
    Compatibility(String),

    #[error("perturbation recursion failed: {0}")]
    Recursion(String),

    #[error("rotation estimate failed: {0}")]
    Estimation(String),

    #[error("tongue measurement failed: {0}")]
    Measurement(String),

    #[error("parse error: {0}")]
    Parse(String),
}
