use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("hyperparameter `{field}` out of range: {reason}")]
    Range { field: &'static str, reason: String },

    #[error("gamma = beta1^2 / sqrt(beta2) = {gamma} must be < 1 in regret mode")]
    Gamma { gamma: f64 },

    #[error("index {index} out of range for dimension {dim}")]
    Index { index: usize, dim: usize },

    #[error("sparse indices must be strictly increasing (index {index} follows {previous})")]
    UnsortedIndices { previous: usize, index: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("gradient contains a non-finite entry at index {index}")]
    NonFiniteGradient { index: usize },

    #[error("update produced a non-finite parameter at index {index}")]
    NonFinite { index: usize },

    #[error("{0} requires a constant beta1 schedule")]
    ScheduledBeta1(&'static str),

    #[error("gradient sequence is empty")]
    EmptySequence,

    #[error("L^p moment with p = {p} overflows; use a smaller p")]
    Overflow { p: u32 },

    #[error("moments are undefined before the first step")]
    ZeroSteps,

    #[error("batch is empty")]
    EmptyBatch,

    #[error("batch size {batch_size} exceeds dataset size {n}")]
    BatchTooLarge { batch_size: usize, n: usize },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("io error: {0}")]
    Io(String),

    #[error("theorem bound requires lambda < 1")]
    LambdaOne,

    #[error("need at least {needed} checkpoints with positive regret, found {found}")]
    DegenerateRegret { needed: usize, found: usize },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
