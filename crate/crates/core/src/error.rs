//! Error type shared by every module in the crate.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// A ternary digit outside {0,2}.
    #[error("invalid Cantor digit {0}, expected 0 or 2")]
    InvalidDigit(u8),
    /// A point handed to a space (or map) it does not belong to.
    #[error("point does not belong to the expected space")]
    WrongSpace,
    /// A numeric argument outside its allowed range.
    #[error("out of range: {0}")]
    OutOfRange(String),
    /// A point outside a map's domain.
    #[error("outside the map's domain: {0}")]
    DomainError(String),
    /// A distance matrix that is not a metric.
    #[error("not a metric: {0}")]
    BadMetric(String),
    /// A declared Lipschitz bound violated by the stored values.
    #[error("Lipschitz bound violated: {0}")]
    NotLipschitz(String),
    /// An operation outside the exactly computable fragment.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// Threshold above the sample's horizon.
    #[error("threshold exceeds the sample horizon")]
    BadThreshold,
    /// Samples with different horizons cannot be intersected.
    #[error("horizon mismatch between samples")]
    BadHorizon,
    /// No return time found within the search horizon.
    #[error("no return time within horizon {0}")]
    HorizonExceeded(u64),
    /// The auxiliary map does not commute with the tuple.
    #[error("map does not commute with every tuple member")]
    NotCommuting,
    /// Molecule endpoints must be distinct.
    #[error("molecule endpoints coincide")]
    DegenerateMolecule,
    /// A Lipschitz function lacking a value at a support point.
    #[error("function has no value at a support point")]
    IncompleteFunction,
    /// Power lists must be strictly increasing.
    #[error("powers must be distinct and strictly increasing")]
    NotDistinct,
    /// Ball radii must be positive.
    #[error("radius must be positive")]
    BadRadius,
    /// Index outside the valid range (e.g. gap index 0).
    #[error("bad index: {0}")]
    BadIndex(String),
    /// Text that does not parse as a point, map, set or fraction literal.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
