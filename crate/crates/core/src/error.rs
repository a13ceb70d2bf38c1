use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the reasoning engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("namespace collision: `{name}` is used both as {first} and {second}")]
    NamespaceCollision {
        name: String,
        first: &'static str,
        second: &'static str,
    },

    #[error("knowledge base is empty after filtering")]
    EmptyKb,

    #[error("split produces an empty partition: {0}")]
    EmptyPartition(String),

    #[error("query syntax error at byte {pos}: {msg}")]
    QuerySyntax { pos: usize, msg: String },

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("sampler exhausted: produced {achieved} of {requested} `{qtype}` queries")]
    SamplerExhausted {
        qtype: String,
        requested: usize,
        achieved: usize,
    },

    #[error("membership degree {0} is outside [0, 1]")]
    Domain(f64),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("cannot corrupt: candidate pool has {0} element(s)")]
    CannotCorrupt(usize),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
