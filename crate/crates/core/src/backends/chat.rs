//! Chat-completion HTTP client.

use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, Semaphore};
use tokio::time::Instant;

use super::{Backend, BackendError, BackendResponse, GenerationParams, GenerationRequest, TokenUsage};

pub const DEFAULT_API_KEY_ENV: &str = "DECOMPCHECK_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    #[serde(with = "millis")]
    pub base_delay: Duration,
    #[serde(with = "millis")]
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based): `base * 2^retry`, capped.
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry.min(31)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[derive(Debug, Clone)]
pub struct ChatConfig {
    /// Full URL the request is POSTed to.
    pub endpoint: String,
    pub tag: String,
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
    /// Minimum spacing between request starts.
    pub min_interval: Duration,
    pub timeout: Duration,
}

impl ChatConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            tag: "chat".into(),
            retry: RetryPolicy::default(),
            max_in_flight: 8,
            min_interval: Duration::ZERO,
            timeout: Duration::from_secs(600),
        }
    }
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [Message<'a>; 1],
    temperature: f64,
    top_p: f64,
    top_k: u32,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

enum Attempt {
    Done(String, Option<TokenUsage>),
    Retry(BackendError),
    Fail(BackendError),
}

/// Bounded-concurrency, rate-limited chat client. Safe to share across tasks.
#[derive(Debug)]
pub struct ChatBackend {
    client: reqwest::Client,
    config: ChatConfig,
    params: GenerationParams,
    api_key: Option<String>,
    in_flight: Semaphore,
    next_slot: Mutex<Instant>,
}

impl ChatBackend {
    /// Reads the bearer token from `api_key_env`; an unset variable sends no
    /// authorization header.
    pub fn new(config: ChatConfig, params: GenerationParams, api_key_env: &str) -> Result<Self, BackendError> {
        let key = std::env::var(api_key_env).ok().filter(|k| !k.is_empty());
        Self::with_api_key(config, params, key)
    }

    pub fn with_api_key(config: ChatConfig, params: GenerationParams, api_key: Option<String>) -> Result<Self, BackendError> {
        params.validate()?;
        if config.max_in_flight == 0 {
            return Err(BackendError::InvalidParams("max_in_flight must be positive".into()));
        }
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Network(e.to_string()))?;
        Ok(Self {
            client,
            in_flight: Semaphore::new(config.max_in_flight),
            next_slot: Mutex::new(Instant::now()),
            config,
            params,
            api_key,
        })
    }

    async fn pace(&self) {
        if self.config.min_interval.is_zero() {
            return;
        }
        let slot = {
            let mut next = self.next_slot.lock().await;
            let slot = (*next).max(Instant::now());
            *next = slot + self.config.min_interval;
            slot
        };
        tokio::time::sleep_until(slot).await;
    }

    async fn attempt(&self, prompt: &str) -> Attempt {
        let body = ChatRequest {
            model: &self.params.model_name,
            messages: [Message {
                role: "user",
                content: prompt,
            }],
            temperature: self.params.temperature,
            top_p: self.params.top_p,
            top_k: self.params.top_k,
            max_tokens: self.params.max_new_tokens,
        };
        let mut req = self.client.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send().await {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(BackendError::Network(e.to_string())),
        };
        let status = resp.status().as_u16();
        let text = match resp.text().await {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(BackendError::Network(e.to_string())),
        };
        match status {
            200..=299 => match serde_json::from_str::<ChatResponse>(&text) {
                Ok(parsed) => match parsed.choices.into_iter().next().and_then(|c| c.message.content) {
                    Some(content) => Attempt::Done(
                        content,
                        parsed.usage.map(|u| TokenUsage {
                            prompt_tokens: u.prompt_tokens,
                            completion_tokens: u.completion_tokens,
                        }),
                    ),
                    None => Attempt::Fail(BackendError::Malformed("response has no choices[0].message.content".into())),
                },
                Err(e) => Attempt::Fail(BackendError::Malformed(e.to_string())),
            },
            401 | 403 => Attempt::Fail(BackendError::Auth { status }),
            429 | 500..=599 => Attempt::Retry(BackendError::Status { status, body: text }),
            _ => Attempt::Fail(BackendError::Status { status, body: text }),
        }
    }

    /// Sends one prompt, retrying network errors, 429 and 5xx with capped
    /// exponential backoff. Other 4xx responses fail immediately.
    pub async fn complete(&self, prompt: &str) -> Result<BackendResponse, BackendError> {
        let _permit = self.in_flight.acquire().await.expect("semaphore never closed");
        let started = std::time::Instant::now();
        let mut attempts = 0;
        loop {
            self.pace().await;
            attempts += 1;
            match self.attempt(prompt).await {
                Attempt::Done(raw_text, usage) => {
                    return Ok(BackendResponse {
                        raw_text,
                        latency_ms: started.elapsed().as_millis() as u64,
                        usage,
                        backend_tag: self.config.tag.clone(),
                        attempts,
                    })
                }
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) if attempts > self.config.retry.max_retries => {
                    return Err(BackendError::RetryExhausted {
                        attempts,
                        last: Box::new(e),
                    })
                }
                Attempt::Retry(e) => {
                    tracing::warn!(attempt = attempts, error = %e, "retrying chat request");
                    tokio::time::sleep(self.config.retry.delay(attempts - 1)).await;
                }
            }
        }
    }
}

#[async_trait]
impl Backend for ChatBackend {
    fn tag(&self) -> &str {
        &self.config.tag
    }

    fn params(&self) -> Option<&GenerationParams> {
        Some(&self.params)
    }

    fn max_in_flight(&self) -> usize {
        self.config.max_in_flight
    }

    async fn generate(&self, request: &GenerationRequest<'_>) -> Result<BackendResponse, BackendError> {
        self.complete(request.prompt).await
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy {
            max_retries: 10,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(1000),
        };
        let d: Vec<u128> = (0..6).map(|i| p.delay(i).as_millis()).collect();
        assert_eq!(d, [100, 200, 400, 800, 1000, 1000]);
        assert_eq!(p.delay(40), Duration::from_millis(1000));
    }

    #[test]
    fn request_body_shape() {
        let body = ChatRequest {
            model: "m",
            messages: [Message { role: "user", content: "hi" }],
            temperature: 0.3,
            top_p: 0.75,
            top_k: 50,
            max_tokens: 8172,
        };
        let v = serde_json::to_value(&body).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys.len(), 6);
        for k in ["model", "messages", "temperature", "top_p", "top_k", "max_tokens"] {
            assert!(keys.contains(&k), "{k}");
        }
        assert_eq!(v["messages"][0]["role"], "user");
    }
}
