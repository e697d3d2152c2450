use thiserror::Error;

/// Errors raised by the library.
///
/// Non-identifiability is not an error: the bound routines report it through
/// [`crate::fim::CribResult`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("leading block is singular (rcond {rcond:.3e})")]
    SingularBlock { rcond: f64 },
    #[error("matrix is singular (rcond {rcond:.3e})")]
    SingularMatrix { rcond: f64 },
    #[error("invalid distribution parameters: {0}")]
    InvalidParams(String),
    #[error("score function is singular at the origin for alpha < 1")]
    ScoreSingularity,
    #[error("invalid block count {0}")]
    InvalidBlockCount(i64),
    #[error("block index {t} out of range 1..={blocks}")]
    BlockOutOfRange { t: usize, blocks: usize },
    #[error("upper mixing coefficient is zero (|gamma_t| = {0:.3e})")]
    GammaZero(f64),
    #[error("distortionless constraint violated: |w^H a - 1| = {0:.3e}")]
    ConstraintViolated(f64),
    #[error("derived upper mixing coefficient degenerate (|gamma| = {0:.3e})")]
    DegenerateGamma(f64),
    #[error("tau must lie in [0, 1], got {0}")]
    InvalidTau(f64),
    #[error("sample count {n} is not divisible by block count {blocks}")]
    Indivisible { n: usize, blocks: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
