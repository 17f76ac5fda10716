//! Errors produced by providers and agent operations.

use thiserror::Error;

pub type AgentResult<T> = std::result::Result<T, AgentError>;

#[derive(Debug, Error)]
pub enum AgentError {
    /// The provider could not be reached or returned a non-success status.
    #[error("provider transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    /// The response could not be parsed into the expected shape, even after
    /// the single re-prompt. Carries the raw text for diagnosis.
    #[error("unparsable response: {reason}; raw text: {raw:?}")]
    Parse { reason: String, raw: String },

    /// The provider lacks a required capability (e.g. embeddings).
    #[error("provider capability missing: {0}")]
    Capability(String),

    /// An operation was invoked on candidates whose verdicts are not all set.
    #[error("state error: {0}")]
    State(String),

    /// A precondition on the inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A scripted or recorded provider had no entry for the prompt.
    #[error("transcript mismatch: no recorded response for prompt starting {prompt_head:?}")]
    TranscriptMismatch { prompt_head: String },

    /// A template referenced a placeholder with no supplied value.
    #[error("template error: {0}")]
    Template(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed script or transcript: {0}")]
    Malformed(String),
}

impl AgentError {
    pub(crate) fn parse(reason: impl Into<String>, raw: impl Into<String>) -> Self {
        AgentError::Parse { reason: reason.into(), raw: raw.into() }
    }
}
