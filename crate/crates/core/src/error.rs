//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("unknown tower id `{0}`")]
    UnknownTower(String),

    #[error("duplicate tower id `{0}`")]
    DuplicateTower(String),

    #[error("non-finite coordinate for tower `{0}`")]
    NonFiniteCoordinate(String),

    #[error("bad header: expected `{expected}`, got `{got}`")]
    BadHeader { expected: String, got: String },

    #[error("line {line}: {reason}")]
    MalformedLine { line: u64, reason: String },

    #[error("invalid month window: {0}")]
    InvalidWindow(String),

    #[error("month windows overlap: `{0}` and `{1}`")]
    OverlappingWindows(String, String),

    #[error("empty trace for user `{0}`")]
    EmptyTrace(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("record does not match trace key (user `{expected}`, got `{got}`)")]
    TraceKeyMismatch { expected: String, got: String },

    #[error("detection for user `{0}` has no spatial uncertainty attached")]
    MissingUncertainty(String),

    #[error("user `{0}` is not in the ground truth")]
    UnknownUser(String),

    #[error("no users in common between the two detection sets")]
    EmptyCommonSet,

    #[error("cosine similarity undefined for a zero vector")]
    ZeroVector,

    #[error("population vector length {got} does not match network size {expected}")]
    VectorLengthMismatch { expected: usize, got: usize },

    #[error("correlation needs at least 3 points, got {0}")]
    InsufficientPoints(usize),

    #[error("correlation undefined: zero variance in {0}")]
    ZeroVariance(&'static str),

    #[error("degenerate field: all values equal")]
    DegenerateField,

    #[error("hot/cold classification needs at least 2 towers, got {0}")]
    TooFewTowers(usize),

    #[error("non-finite value at tower `{0}`")]
    NonFiniteValue(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("missing config key `{0}`")]
    MissingConfigKey(&'static str),

    #[error("unknown config key `{0}`")]
    UnknownConfigKey(String),

    #[error("invalid value for config key `{key}`: {reason}")]
    BadConfigValue { key: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
