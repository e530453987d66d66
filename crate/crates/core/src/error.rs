use thiserror::Error;

/// Errors raised by problem construction and the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric positive definite (pivot {pivot:e} at position {position})")]
    NotPositiveDefinite { position: usize, pivot: f64 },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("cholesky update degenerate: pivot {pivot:e} below floor {floor:e} for index {index}")]
    Degenerate { index: usize, pivot: f64, floor: f64 },

    #[error("parametric active-set tracking did not terminate after {steps} steps")]
    NonTermination { steps: usize },

    #[error("{stage} did not converge within {iterations} iterations")]
    NotConverged { stage: &'static str, iterations: usize },

    #[error("subproblem failed at outer iteration {iteration}: {source}")]
    Subproblem {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("schema error at `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("refusing to serialize non-finite value in `{0}`")]
    NonFinite(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension {
            what,
            expected,
            got,
        });
    }
    Ok(())
}
