use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("index {index} out of range (limit {limit})")]
    OutOfRange { index: u64, limit: u64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("field too small: need {needed} distinct points, prime is {prime}")]
    FieldTooSmall { needed: u64, prime: u64 },
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("inconsistent overdetermined system: {0}")]
    Inconsistent(String),
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("demand requests a single file; use the single-file path")]
    OneSidedDemand,
    #[error("file length {file_len} not divisible across segments; minimal compatible length is {minimal}")]
    Indivisible { file_len: u64, minimal: u64 },
    #[error("numeric solver failed: {0}")]
    Solver(String),
}
