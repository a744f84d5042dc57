use alloc::string::String;

/// Errors raised by the modelling routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid observation at row {row}: {reason}")]
    InvalidObservation { row: usize, reason: &'static str },
    #[error("invalid curve: {0}")]
    InvalidCurve(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("no events")]
    NoEvents,
    #[error("separation / non-identifiable")]
    Separation,
    #[error("collinear covariates")]
    Collinear,
    #[error("no out-of-bag data")]
    NoOutOfBag,
    #[error("degenerate labels")]
    DegenerateLabels,
    #[error("zero variance in both samples")]
    ZeroVariance,
    #[error("future events for player {0}")]
    FutureEvents(String),
    #[error("unknown feature {0}")]
    UnknownFeature(String),
}

pub type Result<T> = core::result::Result<T, Error>;
