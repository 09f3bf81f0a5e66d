use thiserror::Error;

use crate::factorizer::PartialFactorization;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The state vector would need more qubits than the configured cap.
    #[error("register width {width} exceeds the cap of {cap} qubits")]
    Capacity { width: u32, cap: u32 },

    /// Ledger phases were nested in a conflicting way.
    #[error("usage error: {0}")]
    Usage(String),

    /// A search budget ran out before the factorization was complete.
    #[error("inconclusive: {reason}")]
    Inconclusive {
        reason: String,
        partial: Box<PartialFactorization>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
