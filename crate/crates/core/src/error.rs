use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("modulus {0} is not a supported prime (need prime p <= 17)")]
    BadModulus(u32),

    #[error("ambient p^n = {p}^{n} exceeds the table cap of 2^22 points")]
    AmbientTooLarge { p: u32, n: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("ambient mismatch between operands")]
    AmbientMismatch,

    #[error("coordinate {value} out of range for p = {p}")]
    CoordinateOutOfRange { value: u32, p: u32 },

    #[error("the map family spans only the zero map")]
    EmptySpan,

    #[error("map family contains an affine (non-linear) member")]
    NotLinear,

    #[error("set is empty")]
    EmptySet,

    #[error("threshold must be positive")]
    NonPositiveThreshold,

    #[error("enumeration budget exceeded: need {needed}, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("exact counts overflowed the 128-bit representation")]
    Overflow,

    #[error("representation search exhausted for point index {0}")]
    RepresentationNotFound(usize),

    #[error("point index {0} of the subspace has zero representations")]
    NotContained(usize),

    #[error("arithmetic mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("word longer than 12 letters")]
    WordTooLong,

    #[error("invalid word character {0:?}")]
    BadWord(char),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
