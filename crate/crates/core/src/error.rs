use thiserror::Error;

use crate::linalg::LinalgError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("inverse oracle access is not available")]
    InverseAccess,
    #[error("oracle level {level} outside 1..={max}")]
    LevelOutOfRange { level: usize, max: usize },
    #[error("oracle key {key} does not fit in {level} bits")]
    KeyOutOfRange { level: usize, key: u64 },
    #[error("oracle family needs {needed} matrix entries, budget is {budget}")]
    EntryBudget { needed: usize, budget: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("desk-scale cap exceeded: {0}")]
    CapViolation(String),
    #[error("unknown {kind} `{name}`; known: {known}")]
    UnknownName { kind: &'static str, name: String, known: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("report format version {found} is not supported (expected {expected})")]
    ReportVersion { found: u32, expected: u32 },
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
