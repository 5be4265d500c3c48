//! Verifier backends.
//!
//! A [`Backend`] turns one rendered prompt into raw model text. Three are
//! provided: [`ChatBackend`] for chat-completion HTTP endpoints,
//! [`LexicalBackend`] for deterministic offline runs and [`ReplayBackend`]
//! for answering from a stored prediction file. Verdict parsing lives in
//! [`verdict`].

mod chat;
mod decompose;
mod lexical;
mod replay;
pub mod store;
pub mod verdict;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{AlignmentError, StructuredPrompt};

pub use chat::{ChatBackend, ChatConfig, RetryPolicy, DEFAULT_API_KEY_ENV};
pub use decompose::decompose_claim;
pub use lexical::{lexical_verify_claim, lexical_verify_subclaim, LexicalBackend, LexicalThresholds};
pub use replay::ReplayBackend;
pub use store::{replay_lookup, Duplicates, PredictionStore, StoreError, StoreKey, StoreRecord};
pub use verdict::{format_verdict, parse_claim_verdict, parse_subclaim_verdict, NoVerdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: u32,
    pub max_new_tokens: u32,
    pub model_name: String,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 0.3,
            top_p: 0.75,
            top_k: 50,
            max_new_tokens: 8172,
            model_name: String::new(),
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), BackendError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(BackendError::InvalidParams(format!("temperature {} must be >= 0", self.temperature)));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(BackendError::InvalidParams(format!("top_p {} must be in (0, 1]", self.top_p)));
        }
        if self.max_new_tokens == 0 {
            return Err(BackendError::InvalidParams("max_new_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendResponse {
    pub raw_text: String,
    pub latency_ms: u64,
    pub usage: Option<TokenUsage>,
    pub backend_tag: String,
    /// Requests sent, including the successful one.
    pub attempts: u32,
}

/// One verifier call. Backends pick what they need: HTTP backends send
/// `prompt`, the replay backend looks up `key`, the lexical backend reads
/// `structured`.
#[derive(Debug, Clone, Copy)]
pub struct GenerationRequest<'a> {
    pub key: &'a StoreKey,
    pub prompt: &'a str,
    pub structured: &'a StructuredPrompt,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("network error: {0}")]
    Network(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("authentication rejected (HTTP {status})")]
    Auth { status: u16 },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("gave up after {attempts} attempts; last error: {last}")]
    RetryExhausted { attempts: u32, last: Box<BackendError> },
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("backend {backend:?} cannot answer {kind} prompts")]
    Unsupported { backend: String, kind: String },
    #[error("decomposition produced no statements")]
    EmptyDecomposition,
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
}

#[async_trait]
pub trait Backend: Send + Sync {
    /// Identifier stored with every prediction.
    fn tag(&self) -> &str;

    /// Sampling parameters sent to the model, if any.
    fn params(&self) -> Option<&GenerationParams> {
        None
    }

    /// Concurrent calls the backend accepts.
    fn max_in_flight(&self) -> usize {
        16
    }

    async fn generate(&self, request: &GenerationRequest<'_>) -> Result<BackendResponse, BackendError>;
}
