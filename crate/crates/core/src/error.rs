use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    /// Two quadrature resolutions disagree beyond tolerance.
    #[error("quadrature accuracy: coarse value {coarse} vs fine value {fine}")]
    Accuracy { coarse: f64, fine: f64 },

    #[error("bandwidth window not yet valid at n = {n}; use n >= {n_min}")]
    WindowNotYetValid { n: u64, n_min: u64 },

    #[error("invalid bandwidth window: {0}")]
    InvalidWindow(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("model inconsistency at {point:?}: {reason}")]
    ModelInconsistency { point: Vec<f64>, reason: String },

    #[error("invariant violated at {point:?}: {reason}")]
    InvariantViolation { point: Vec<f64>, reason: String },

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),
}

pub type Result<T> = core::result::Result<T, Error>;
