use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid needs at least two states, got {0}")]
    GridTooSmall(usize),
    #[error("operation requires an odd number of states, got {0}")]
    EvenGrid(usize),
    #[error("bias must be finite and non-negative, got {0}")]
    InvalidBias(f64),
    #[error("exploration weight must lie in [0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("step size must lie in (0, 1], got {0}")]
    InvalidStepSize(f64),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("index {index} out of range for {len} states")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("row {row} is not a probability distribution (sum {sum})")]
    NotStochastic { row: usize, sum: f64 },
    #[error("entry ({row}, {col}) = {value} is invalid")]
    InvalidEntry { row: usize, col: usize, value: f64 },
    #[error("policy pools are not an ordered contiguous partition (state {state}, message {message})")]
    NotAPartition { state: usize, message: usize },
    #[error("partition sizes {sizes:?} do not cover {k} states")]
    BadPartition { sizes: Vec<usize>, k: usize },
    #[error("enumeration is capped at K <= {cap}, got {k}")]
    EnumerationCap { k: usize, cap: usize },
    #[error("no sign change bracketed on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("state left the admissible region at t = {t}")]
    Inadmissible { t: f64 },
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
