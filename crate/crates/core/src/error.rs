use alloc::string::String;

/// Errors raised by the simulation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("sites are not lattice neighbours")]
    NotAdjacent,
    #[error("edge lies outside the window halo")]
    EdgeOutsideHalo,
    #[error("invalid distribution spec: {0}")]
    InvalidDistribution(String),
    #[error("invalid shape spec: {0}")]
    InvalidShape(String),
    #[error("degenerate frame: direction is parallel to its supporting hyperplane")]
    DegenerateFrame,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("target unreachable inside the allowed region")]
    Unreachable,
    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
