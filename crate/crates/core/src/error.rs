use thiserror::Error;

/// Errors raised by the model, fitting and experiment layers.
///
/// Vertex indices carried by these variants are 1-based.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("pair ({i}, {j}) has pair-sum {value} outside the {family} parameter domain")]
    InvalidParameter {
        family: String,
        i: usize,
        j: usize,
        value: f64,
    },

    #[error("pair-sum {value} is outside the {family} parameter domain")]
    OutOfDomain { family: String, value: f64 },

    #[error("edge ({i}, {j}) has weight {value}, not in the {family} support")]
    InvalidWeight {
        family: String,
        i: usize,
        j: usize,
        value: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("matrix is not positive definite")]
    Singular,

    #[error("dense operation refused: n = {n} exceeds the limit {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("unknown {kind} `{name}` (known: {known})")]
    Unknown {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient data: {have} usable fits, need at least {need}")]
    InsufficientData { have: usize, need: usize },

    #[error("malformed JSON: {0}")]
    Json(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Json(err.to_string())
    }
}
