use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors surfaced by the pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("report row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("unknown category {0:?}")]
    UnknownCategory(String),

    #[error("report header: {0}")]
    BadHeader(String),

    #[error("invalid issue: {0}")]
    InvalidIssue(String),

    #[error("structured report: {0}")]
    Structured(#[from] serde_json::Error),

    #[error("report is not valid UTF-8")]
    NotUtf8,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty tier schedule")]
    EmptyTiers,

    #[error("invalid tier schedule: {0}")]
    InvalidTier(String),

    #[error("unqueryable issue: {0:?}")]
    UnqueryableIssue(String),

    #[error("nothing to revise for {0}")]
    NothingToRevise(String),

    #[error("example bank: {0}")]
    ExampleBank(String),

    #[error("ambiguous code payload: {0} fenced blocks")]
    AmbiguousPayload(usize),

    #[error(transparent)]
    Gateway(#[from] crate::gateway::GatewayError),

    #[error("issue count increased from {before} to {after}")]
    IssueCountIncreased { before: u64, after: u64 },

    #[error("analyzer failed on {root}: {reason}")]
    Analyzer { root: PathBuf, reason: String },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("validation: {0}")]
    Validation(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("apply blocked; undecided files: {}", .0.join(", "))]
    GateBlocked(Vec<String>),

    #[error("invalid configuration:\n{}", .0.iter().map(|e| format!("  - {e}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<String>),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
