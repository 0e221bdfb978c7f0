use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// An integral or supremum that diverges within the numeric search range.
    #[error("unbounded: {0}")]
    Unbounded(String),
    /// A point fell outside the region covered by a partition of unity.
    #[error("coverage: {0}")]
    Coverage(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid adversary: {0}")]
    InvalidAdversary(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("scenario: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
