use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("cannot combine pure and mixed states")]
    MixedKinds,

    #[error("register index {index} out of range for {registers} registers")]
    BadRegister { index: usize, registers: usize },

    #[error("outcome {0} has zero probability")]
    ZeroProbability(i64),

    #[error("input space too large for exhaustive enumeration ({0} bits)")]
    TooLarge(usize),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_arg(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
