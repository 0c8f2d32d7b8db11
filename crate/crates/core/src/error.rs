use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },

    #[error("arity conflict on `{symbol}`: used with arity {expected} and {found}")]
    ArityConflict {
        symbol: String,
        expected: usize,
        found: usize,
    },

    #[error("resource limit exceeded: {what} (cap {cap})")]
    ResourceLimit { what: String, cap: usize },

    #[error("undefined transition at step {step}: next goal is not among the candidates")]
    UndefinedTransition { step: usize },

    #[error("missing feature vector for payload ${0}")]
    MissingPayload(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("embedding dimension {dim} is smaller than the {nodes} tree nodes")]
    DimensionTooSmall { dim: usize, nodes: usize },

    #[error("index {index} out of range for {len} candidates")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("illegal action: {0}")]
    IllegalAction(String),

    #[error("query is already terminal")]
    TerminalQuery,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("data error at line {line}: {msg}")]
    Data { line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
