use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid factor specification: {0}")]
    InvalidSpec(String),

    #[error("invalid fraction: {0}")]
    InvalidFraction(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("model fingerprint mismatch: expected {expected}, got {actual}")]
    FingerprintMismatch { expected: String, actual: String },

    #[error("{combinations} subsets of size {k} exceed the exhaustive-scan budget of {budget}")]
    BudgetExceeded {
        combinations: u128,
        k: usize,
        budget: u128,
    },

    #[error("search parameter out of range: {0}")]
    InvalidSearch(String),

    #[error("malformed circuit-basis file: {0}")]
    MalformedBasis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serialization(#[from] serde_json::Error),
}
