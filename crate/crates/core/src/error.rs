use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("support atoms must be pairwise distinct (atoms {0} and {1} coincide)")]
    DuplicateAtoms(usize, usize),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("parameter {name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("matrix is not symmetric positive-definite: {0}")]
    NotSpd(String),

    #[error("matrix condition number {0:.3e} exceeds 1e12")]
    IllConditioned(f64),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("argument {value} for atom {atom} lies outside the table domain [{lo}, {hi}]")]
    OutsideTableDomain {
        atom: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("network carries no support provenance")]
    MissingProvenance,

    #[error("trajectory state became non-finite at layer {0}")]
    DivergedAtLayer(usize),

    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
