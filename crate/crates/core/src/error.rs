use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not positive definite (Sherman-Morrison denominator {0})")]
    NotPositiveDefinite(f64),

    #[error("candidate pool is empty")]
    EmptyPool,

    #[error("no active slave models")]
    EmptySlaveSet,

    #[error(
        "infeasible environment change: no parameter moved {required} arms by more than {delta} \
         within the rejection budget of {budget} candidates"
    )]
    InfeasibleChange {
        delta: f64,
        required: usize,
        budget: usize,
    },

    #[error("arm {0} is not among the presented candidates")]
    NotACandidate(usize),

    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error("malformed replay log: {0}")]
    MalformedLog(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
