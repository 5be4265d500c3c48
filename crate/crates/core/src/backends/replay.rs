use std::sync::Arc;

use async_trait::async_trait;

use super::store::{replay_lookup, PredictionStore};
use super::verdict::format_verdict;
use super::{Backend, BackendError, BackendResponse, GenerationRequest};
use crate::alignment::PromptKind;

/// Answers from a loaded prediction store by exact key. Records with an
/// empty `raw_output` answer with the canonical verdict line for their label.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    tag: String,
    store: Arc<PredictionStore>,
}

impl ReplayBackend {
    pub fn new(tag: impl Into<String>, store: Arc<PredictionStore>) -> Self {
        Self { tag: tag.into(), store }
    }

    pub fn store(&self) -> &PredictionStore {
        &self.store
    }
}

#[async_trait]
impl Backend for ReplayBackend {
    fn tag(&self) -> &str {
        &self.tag
    }

    fn max_in_flight(&self) -> usize {
        usize::MAX >> 4
    }

    async fn generate(&self, request: &GenerationRequest<'_>) -> Result<BackendResponse, BackendError> {
        if request.structured.kind == PromptKind::Decomposition {
            return Err(BackendError::Unsupported {
                backend: self.tag.clone(),
                kind: request.structured.kind.to_string(),
            });
        }
        let record = replay_lookup(request.key, &self.store)?;
        let raw_text = if record.raw_output.is_empty() {
            format_verdict(record.label)
        } else {
            record.raw_output.clone()
        };
        Ok(BackendResponse {
            raw_text,
            latency_ms: 0,
            usage: None,
            backend_tag: self.tag.clone(),
            attempts: 1,
        })
    }
}
