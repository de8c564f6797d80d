use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected} bits, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("brute-force inversion refused: n = {n} exceeds cap {cap}")]
    BruteForceCap { n: usize, cap: usize },

    #[error("training data is empty")]
    EmptyData,

    #[error("data is not realizable: example {index} is misclassified by the learned rule")]
    RealizabilityViolation { index: usize },

    #[error("version space emptied at round {round}; stream is not realizable by the grid")]
    EmptyVersionSpace { round: usize },

    #[error("kernel value {value} outside [-1, 1]")]
    KernelDomain { value: f64 },

    #[error(
        "Gram matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e}); \
         add a small jitter to the diagonal"
    )]
    NotPsd { min_eigenvalue: f64 },

    #[error("search space too large: {count} candidates exceeds cap {cap}")]
    CombinatorialCap { count: u128, cap: u128 },

    #[error("{what} = {value} exceeds the supported maximum {max}")]
    TooLarge {
        what: &'static str,
        value: usize,
        max: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}
