use thiserror::Error;

/// Errors raised across the library. Variants map one-to-one onto the
/// failure modes of the individual operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph contains a directed cycle")]
    CyclicGraph,
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("background knowledge cannot be satisfied: {0}")]
    ConstraintConflict(String),
    #[error("partially directed graph admits no consistent extension")]
    NoExtension,

    #[error("column `{0}` is degenerate (constant or too few distinct values)")]
    DegenerateColumn(String),
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("training labels contain a single class")]
    SingleClassInput,
    #[error("feature schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("singular correlation submatrix")]
    SingularSubmatrix,
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("predictor matrix is rank deficient")]
    RankDeficient,
    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    #[error("method `{method}` does not support prior mode `{mode}`")]
    UnsupportedModeForMethod { method: String, mode: String },

    #[error("empty cell for conditions {0:?}")]
    EmptyCell(Vec<(usize, u32)>),
    #[error("score undefined: {0}")]
    UndefinedScore(String),
    #[error("no valid value pair for variable {0}")]
    NoValidPair(usize),
    #[error("vector is constant; rank correlation undefined")]
    ConstantVector,

    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
