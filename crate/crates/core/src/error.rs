use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("{path}: line {line}, column {column}: {message}")]
    Load {
        path: String,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("too many rows: {0} exceeds the 32-bit rid space")]
    TooManyRows(usize),

    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: usize, message: String },

    #[error("bind error: {0}")]
    Bind(String),

    #[error("type error: {0}")]
    Type(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("duplicate build key under pk-fk join: {0}")]
    DuplicateKey(String),

    #[error("value {value} of {attr} is outside the declared partition domain")]
    OutsideDomain { attr: String, value: String },

    #[error("no lineage index for relation {relation} in result {handle}")]
    NoIndex { handle: String, relation: String },

    #[error("rid {rid} out of range for {relation} ({len} rows)")]
    InvalidRid { relation: String, rid: u32, len: usize },

    #[error("unknown result handle {0}")]
    UnknownHandle(String),

    #[error("unknown relation {0}")]
    UnknownRelation(String),

    #[error("invalid workload: {0}")]
    Workload(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
