use thiserror::Error;

/// Errors raised by the e-variable toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parameter {value} is outside the parameter space of {family}")]
    OutsideParamSpace { family: &'static str, value: f64 },

    #[error("support mismatch: density vanishes at the sample for parameter {0}")]
    SupportMismatch(f64),

    #[error("likelihood equation has no interior solution (boundary MLE)")]
    BoundaryMle,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("net point {0} has a zero-probability cell")]
    ZeroProbabilityCell(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("check not applicable: {0}")]
    NotApplicable(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
