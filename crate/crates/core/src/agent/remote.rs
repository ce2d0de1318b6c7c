use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Agent, AgentError, AgentRequest, Completion, GenerationParams, Usage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_initial_backoff")]
    pub initial_backoff_ms: u64,
    #[serde(default = "default_max_backoff")]
    pub max_backoff_ms: u64,
}

fn default_attempts() -> u32 {
    4
}
fn default_initial_backoff() -> u64 {
    500
}
fn default_max_backoff() -> u64 {
    8_000
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: default_attempts(),
            initial_backoff_ms: default_initial_backoff(),
            max_backoff_ms: default_max_backoff(),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u64.checked_shl(retry.saturating_sub(1)).unwrap_or(u64::MAX);
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

/// A chat-completions service. The credential is read from the environment
/// variable named by `api_key_env` at call time and never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteEndpoint {
    pub base_url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    pub params: GenerationParams,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
}

fn default_timeout() -> u64 {
    120
}

impl RemoteEndpoint {
    pub fn new(base_url: impl Into<String>, params: GenerationParams) -> Self {
        Self {
            base_url: base_url.into(),
            api_key_env: None,
            params,
            timeout_secs: default_timeout(),
            retry: RetryPolicy::default(),
        }
    }

    pub fn url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

pub struct RemoteAgent {
    endpoint: RemoteEndpoint,
    http: ureq::Agent,
}

#[derive(Deserialize)]
struct ChatResponse {
    #[serde(default)]
    choices: Vec<Choice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

enum Attempt {
    Done(Result<Completion, AgentError>),
    Retry(String),
}

impl RemoteAgent {
    pub fn new(endpoint: RemoteEndpoint) -> Result<Self, AgentError> {
        if endpoint.params.temperature < 0.0 || !endpoint.params.temperature.is_finite() {
            return Err(AgentError::Response(format!(
                "temperature must be a non-negative number, got {}",
                endpoint.params.temperature
            )));
        }
        let http = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(endpoint.timeout_secs)))
            .build()
            .into();
        Ok(Self { endpoint, http })
    }

    pub fn endpoint(&self) -> &RemoteEndpoint {
        &self.endpoint
    }

    fn credential(&self) -> Result<Option<String>, AgentError> {
        match &self.endpoint.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| AgentError::MissingCredential(var.clone())),
        }
    }

    /// The JSON body sent for a request.
    pub fn request_body(&self, request: &AgentRequest<'_>) -> serde_json::Value {
        let params = &self.endpoint.params;
        json!({
            "model": params.model,
            "messages": [
                { "role": "system", "content": request.system },
                { "role": "user", "content": request.prompt },
            ],
            "temperature": params.temperature,
            "seed": params.seed.unwrap_or(request.seed),
            "max_tokens": params.max_tokens,
        })
    }

    fn attempt(&self, url: &str, key: Option<&str>, body: &serde_json::Value) -> Attempt {
        let mut call = self.http.post(url).header("Content-Type", "application/json");
        if let Some(key) = key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = match call.send_json(body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = response.status().as_u16();
        match status {
            200..=299 => {}
            401 | 403 => return Attempt::Done(Err(AgentError::Auth(status))),
            429 | 500..=599 => return Attempt::Retry(format!("HTTP {status}")),
            _ => {
                let message = response
                    .body_mut()
                    .read_to_string()
                    .unwrap_or_default()
                    .chars()
                    .take(200)
                    .collect();
                return Attempt::Done(Err(AgentError::Status { status, message }));
            }
        }
        let parsed: ChatResponse = match response.body_mut().read_json() {
            Ok(p) => p,
            Err(e) => return Attempt::Done(Err(AgentError::Response(e.to_string()))),
        };
        let Some(choice) = parsed.choices.into_iter().next() else {
            return Attempt::Done(Err(AgentError::Response("no choices".into())));
        };
        let text = choice.message.content.unwrap_or_default();
        if text.trim().is_empty() {
            return Attempt::Done(Err(AgentError::EmptyCompletion));
        }
        Attempt::Done(Ok(Completion {
            text,
            usage: parsed.usage,
        }))
    }
}

impl Agent for RemoteAgent {
    fn complete(&self, request: &AgentRequest<'_>) -> Result<Completion, AgentError> {
        let key = self.credential()?;
        let body = self.request_body(request);
        let url = self.endpoint.url();
        let attempts = self.endpoint.retry.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            if attempt > 1 {
                std::thread::sleep(self.endpoint.retry.backoff(attempt - 1));
            }
            match self.attempt(&url, key.as_deref(), &body) {
                Attempt::Done(result) => return result,
                Attempt::Retry(reason) => {
                    tracing::warn!(attempt, attempts, %reason, "chat completion failed");
                    last = reason;
                }
            }
        }
        Err(AgentError::Transport {
            attempts,
            message: last,
        })
    }
}
