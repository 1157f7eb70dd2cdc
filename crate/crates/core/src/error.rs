use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("index {index} out of range for dimension {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error(
        "smoother Gram is singular at sample {sample}, node {node} (rcond {rcond:.3e}); \
         increase bandwidth or indicator coefficient"
    )]
    SingularSmoother { sample: usize, node: usize, rcond: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("only {found} non-confounded samples retained, need at least {required}")]
    InsufficientCleanSamples { found: usize, required: usize },

    #[error("effective kernel weight {weight:.3} below required {required:.3}")]
    EffectiveSampleTooSmall { weight: f64, required: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
