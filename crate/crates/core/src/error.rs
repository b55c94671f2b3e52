use thiserror::Error;

use crate::graph::ElemId;

/// Errors raised by the synchronization engine.
///
/// `kind()` yields the stable machine-readable tag used in CLI error output.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("type error in `{rule}`: {msg}")]
    Type { rule: String, msg: String },
    #[error("seed binding incompatible with pattern: {0}")]
    IncompatibleSeed(String),
    #[error("deleting `{node}` would orphan edge `{edge}`")]
    DanglingEdge { node: ElemId, edge: ElemId },
    #[error("attribute condition unsolvable: {0}")]
    AttrUnsolvable(String),
    #[error("step {step}: rule `{rule}` not applicable")]
    NotApplicable { step: usize, rule: String },
    #[error("short-cut overlap ill-typed: {0}")]
    OverlapIllTyped(String),
    #[error("no covering precedence graph exists")]
    NoCover,
    #[error("parse budget of {0} backtracks exhausted")]
    BudgetExhausted(usize),
    #[error("stale delta: {0}")]
    StaleDelta(String),
    #[error("invalid orchestration: {0}")]
    OrchInvalid(String),
    #[error("unresolved conflict `{anchor}` ({kind})")]
    UnresolvedConflict { anchor: String, kind: String },
    #[error("unknown {what} `{name}`")]
    Unknown { what: &'static str, name: String },
    #[error("malformed input: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "PARSE-ERROR",
            Error::Type { .. } => "TYPE-ERROR",
            Error::IncompatibleSeed(_) => "INCOMPATIBLE-SEED",
            Error::DanglingEdge { .. } => "DANGLING-EDGE",
            Error::AttrUnsolvable(_) => "ATTR-UNSOLVABLE",
            Error::NotApplicable { .. } => "NOT-APPLICABLE",
            Error::OverlapIllTyped(_) => "OVERLAP-ILLTYPED",
            Error::NoCover => "NO-COVER",
            Error::BudgetExhausted(_) => "BUDGET-EXHAUSTED",
            Error::StaleDelta(_) => "STALE-DELTA",
            Error::OrchInvalid(_) => "ORCH-INVALID",
            Error::UnresolvedConflict { .. } => "UNRESOLVED-CONFLICT",
            Error::Unknown { .. } => "UNKNOWN",
            Error::Format(_) => "FORMAT-ERROR",
            Error::Io(_) => "IO-ERROR",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
