use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    Validation(String),
    #[error("cannot parse {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("note {0} not found")]
    NotFound(u32),
    #[error("{0}")]
    Conflict(String),
    #[error("{count} notes are still pending; export with allow-partial to write them unlabeled")]
    PendingNotes { count: usize },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("pipeline failed: {0}")]
    Pipeline(String),
}

impl ServiceError {
    /// 1 validation, 2 I/O, 3 pipeline failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            ServiceError::Validation(_)
            | ServiceError::Parse { .. }
            | ServiceError::NotFound(_)
            | ServiceError::Conflict(_)
            | ServiceError::PendingNotes { .. } => 1,
            ServiceError::Io { .. } => 2,
            ServiceError::Pipeline(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::Validation(_) => "validation",
            ServiceError::Parse { .. } => "parse",
            ServiceError::NotFound(_) => "not-found",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::PendingNotes { .. } => "pending-notes",
            ServiceError::Io { .. } => "io",
            ServiceError::Pipeline(_) => "pipeline",
        }
    }

    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ServiceError + '_ {
        move |source| ServiceError::Io { path: path.to_path_buf(), source }
    }

    pub fn parse(path: &Path) -> impl FnOnce(String) -> ServiceError + '_ {
        move |reason| ServiceError::Parse { path: path.to_path_buf(), reason }
    }

    pub fn pipeline(e: impl std::fmt::Display) -> ServiceError {
        ServiceError::Pipeline(e.to_string())
    }
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;
