use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cycle detected through node '{0}'")]
    CycleDetected(String),
    #[error("edge endpoint '{0}' is not a declared node")]
    DanglingEdge(String),
    #[error("duplicate name '{0}'")]
    DuplicateName(String),
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("sets overlap on node '{0}'")]
    OverlappingSets(String),
    #[error("node '{0}' has parents and cannot be used as a pivot")]
    NotParentless(String),
    #[error("node '{0}' is not observed")]
    NotObserved(String),
    #[error("cardinality {0} is invalid; a pivot needs at least 2 values")]
    InvalidCardinality(usize),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("structure has no nodes")]
    EmptyStructure,
    #[error("no catalog entry named '{0}'")]
    UnknownCatalogEntry(String),
    #[error("constraint family {family} is not available under theory {theory}")]
    IncompatibleFamily { family: String, theory: String },
    #[error("row budget of {budget} rows exceeded while eliminating '{column}'")]
    BudgetExceeded {
        budget: usize,
        column: String,
        /// Rows supported on kept columns at the time of abortion; every one
        /// of them is a valid (if incomplete) consequence of the input.
        partial: Box<crate::poly::InequalitySystem>,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("entropy point violates the observed Shannon constraints: {0}")]
    NonEntropicPoint(String),
    #[error("invalid symmetry generator: {0}")]
    InvalidGenerator(String),
    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
