use thiserror::Error;

/// Errors raised by graph construction, enumeration, sampling and verification.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SrpError {
    /// A size or work budget was exceeded.
    #[error("capacity exceeded: {what} ({requested} > cap {cap})")]
    Capacity {
        what: &'static str,
        requested: u64,
        cap: u64,
    },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    /// A configuration violated one of its structural invariants.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    /// A sampling strategy broke its keep-set contract.
    #[error("sampling strategy contract violated: {0}")]
    StrategyContract(String),
    #[error("parameter domain error: {0}")]
    Domain(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    /// The requested operation needs a certificate that is not available.
    #[error("refused: {0}")]
    Refused(String),
}

pub type Result<T> = std::result::Result<T, SrpError>;

impl SrpError {
    pub fn capacity(what: &'static str, requested: u64, cap: u64) -> Self {
        SrpError::Capacity { what, requested, cap }
    }

    pub fn is_capacity(&self) -> bool {
        matches!(self, SrpError::Capacity { .. })
    }
}
