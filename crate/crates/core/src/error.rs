use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("weights must be strictly positive (entry {index} is {value})")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("atom `{0}` has no registered closed-form conjugate")]
    UnsupportedConjugate(&'static str),

    #[error("atom `{0}` cannot be lowered to a restricted convex program")]
    UnsupportedAtom(&'static str),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("r = {r} exceeds the enumeration cap {cap}")]
    CapExceeded { r: usize, cap: usize },

    #[error("solver could not reach a verdict: {0}")]
    Indeterminate(String),

    #[error("point is not stationary (residual {residual:e})")]
    NotStationary { residual: f64 },

    #[error("no admissible weights: {0}")]
    NoAdmissibleWeights(String),

    #[error("empty subdifferential: {0}")]
    EmptySubdifferential(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            context: context.to_string(),
            expected,
            got,
        });
    }
    Ok(())
}
