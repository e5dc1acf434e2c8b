use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A configuration value or argument is outside its contract.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input data violates a structural invariant (duplicates, bad labels, ranges).
    #[error("data integrity: {0}")]
    DataIntegrity(String),

    #[error("insufficient {what}: need {needed}, have {available}")]
    Insufficient {
        what: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A loss was evaluated outside its domain (e.g. 0-1 loss on a non-binary target).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}
