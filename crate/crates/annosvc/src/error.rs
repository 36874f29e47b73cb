use altogether_core::corpus::CorpusError;
use serde::Serialize;

/// One reason a submission was refused.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// `checklist`, `starting_prompt` or `annotator`.
    pub kind: &'static str,
    pub key: String,
    pub detail: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("submission rejected: {}", describe(.0))]
    Rejected(Vec<Violation>),
    #[error("{0} not found")]
    NotFound(String),
    #[error("a project named {0:?} already exists")]
    ProjectExists(String),
    #[error("project {project} is at round {current}; the next round to open is {}, not {requested}", .current + 1)]
    RoundSequence {
        project: String,
        current: u32,
        requested: u32,
    },
    #[error("round {round} still has unsubmitted items: {}", .pending.join(", "))]
    RoundIncomplete { round: u32, pending: Vec<String> },
    #[error("assignment {0} was already submitted")]
    AlreadySubmitted(String),
    #[error("items rejected: {0}")]
    Ingest(#[from] CorpusError),
    #[error("event log i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("event log line {line}: {detail}")]
    Replay { line: usize, detail: String },
}

fn describe(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("{} {}", x.kind, x.key))
        .collect::<Vec<_>>()
        .join(", ")
}

impl ServiceError {
    /// Stable machine-readable code used in error responses.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Invalid(_) => "invalid_request",
            ServiceError::Rejected(_) => "validation_failed",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::ProjectExists(_) => "project_exists",
            ServiceError::RoundSequence { .. } => "round_sequence",
            ServiceError::RoundIncomplete { .. } => "round_incomplete",
            ServiceError::AlreadySubmitted(_) => "already_submitted",
            ServiceError::Ingest(_) => "ingest_failed",
            ServiceError::Io(_) | ServiceError::Replay { .. } => "internal",
        }
    }
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;
