use alloc::string::String;

use crate::model::{PostId, Step};
use crate::oracle::OracleError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    /// A post violates the length bounds. Signals a post-processing bug when
    /// raised for generated text.
    #[error("rejected post: {words} words (allowed 1..={max})")]
    RejectedPost { words: usize, max: usize },
    #[error("post submitted at step {submitted_at} but the timeline is at step {current}")]
    StepMismatch { submitted_at: Step, current: Step },
    #[error("post {0} is already in the perspective")]
    DuplicateEntry(PostId),
    #[error("perspective is at capacity {0}")]
    PerspectiveFull(usize),
    #[error("unknown post {0}")]
    UnknownPost(PostId),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
}

/// A configuration problem, naming the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { field: field.into(), message: message.into() }
    }

    /// Prefix the field path, e.g. `epsilon` becomes `simulation.epsilon`.
    pub fn within(mut self, parent: &str) -> Self {
        self.field = alloc::format!("{parent}.{}", self.field);
        self
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("oracle failure at step {step}, agent {agent}: {source}")]
    Oracle { step: Step, agent: usize, source: OracleError },
    #[error("model error at step {step}, agent {agent}: {source}")]
    Model { step: Step, agent: usize, source: ModelError },
    #[error(transparent)]
    Config(#[from] ConfigError),
}
