//! Chat-completion clients.
//!
//! [`GenerationClient`] is the only seam between corpus synthesis and a text
//! generation service. [`HttpChatClient`] talks to any OpenAI-compatible
//! `/chat/completions` endpoint; [`OfflineClient`] renders the deterministic
//! fallback templates without touching the network.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::fallback::{render_fallback_comparison, render_fallback_description};
use super::prompts::{parse_ab_query, parse_mos_query};

static NETWORK_FORBIDDEN: AtomicBool = AtomicBool::new(false);

/// Refuse every network request made by this process from now on.
pub fn forbid_network() {
    NETWORK_FORBIDDEN.store(true, Ordering::SeqCst);
}

pub fn network_forbidden() -> bool {
    NETWORK_FORBIDDEN.load(Ordering::SeqCst)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClientError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("service returned HTTP {code}: {body}")]
    Status { code: u16, body: String },
    #[error("malformed service response: {0}")]
    Malformed(String),
    #[error("empty completion")]
    EmptyCompletion,
    #[error("network access is disabled (offline mode)")]
    NetworkForbidden,
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: Box<ClientError> },
}

impl ClientError {
    pub fn is_retryable(&self) -> bool {
        match self {
            ClientError::Transport(_) => true,
            ClientError::Status { code, .. } => *code == 429 || *code >= 500,
            _ => false,
        }
    }
}

/// Sampling parameters sent with a generation request.
///
/// `None` for temperature or top-p leaves the value to the service default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenParams {
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            temperature: None,
            top_p: None,
            max_tokens: 1024,
            seed: None,
        }
    }
}

impl GenParams {
    /// The diversity profile used for the second generation pass.
    pub fn second_generation() -> Self {
        Self {
            temperature: Some(1.1),
            top_p: Some(0.9),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if let Some(t) = self.temperature {
            if !(t > 0.0 && t.is_finite()) {
                return Err(format!("temperature must be > 0, got {t}"));
            }
        }
        if let Some(p) = self.top_p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(format!("top_p must lie in (0, 1], got {p}"));
            }
        }
        if self.max_tokens == 0 {
            return Err("max_tokens must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub system: Option<String>,
    pub user: String,
    pub params: GenParams,
}

impl ChatRequest {
    pub fn new(user: impl Into<String>, params: GenParams) -> Self {
        Self {
            system: None,
            user: user.into(),
            params,
        }
    }
}

pub trait GenerationClient: Send + Sync {
    /// Identifier recorded in corpus provenance.
    fn name(&self) -> &str;

    /// Raw completion text for one request, without retries.
    fn complete(&self, request: &ChatRequest) -> Result<String, ClientError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff_ms: 500,
            max_backoff_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            initial_backoff_ms: 0,
            max_backoff_ms: 0,
        }
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let ms = self
            .initial_backoff_ms
            .saturating_mul(1u64 << attempt.min(16))
            .min(self.max_backoff_ms);
        Duration::from_millis(ms)
    }
}

/// Send `prompt` to `client`, retrying transport-level failures.
///
/// The completion is returned unmodified; an empty (whitespace-only) completion
/// is a content error and is not retried here.
pub fn generate(
    prompt: &str,
    client: &dyn GenerationClient,
    params: &GenParams,
    retry: &RetryPolicy,
) -> Result<String, ClientError> {
    let request = ChatRequest::new(prompt, params.clone());
    let attempts = retry.max_attempts.max(1);
    let mut last = None;
    for attempt in 0..attempts {
        match client.complete(&request) {
            Ok(text) if text.trim().is_empty() => return Err(ClientError::EmptyCompletion),
            Ok(text) => return Ok(text),
            Err(e) if e.is_retryable() => {
                log::debug!("{}: attempt {} failed: {e}", client.name(), attempt + 1);
                last = Some(e);
                if attempt + 1 < attempts {
                    std::thread::sleep(retry.backoff(attempt));
                }
            }
            Err(e) => return Err(e),
        }
    }
    Err(ClientError::RetriesExhausted {
        attempts,
        last: Box::new(last.expect("at least one attempt was made")),
    })
}

/// Deterministic offline adapter.
///
/// Recognizes the MOS-description and A/B prompts built by this crate, parses
/// the current score tuple(s) out of the prompt and renders the fallback
/// template seeded by `params.seed`.
#[derive(Debug, Clone, Default)]
pub struct OfflineClient {
    pub gap: Option<f64>,
}

impl GenerationClient for OfflineClient {
    fn name(&self) -> &str {
        "offline-fallback"
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, ClientError> {
        let seed = request.params.seed.unwrap_or(0);
        if let Some((a, b)) = parse_ab_query(&request.user) {
            let gap = self.gap.unwrap_or(super::DEFAULT_GAP);
            return Ok(render_fallback_comparison(&a, &b, gap, seed));
        }
        if let Some(meta) = parse_mos_query(&request.user) {
            return Ok(render_fallback_description(&meta, seed).response_text);
        }
        Err(ClientError::Malformed(
            "offline adapter only understands MOS and A/B prompts".into(),
        ))
    }
}

/// Settings for an OpenAI-compatible chat-completion endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpClientConfig {
    /// Base URL, e.g. `http://localhost:8000/v1`.
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token, if any.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
}

impl Default for HttpClientConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            model: "meta-llama/Llama-3.1-70B-Instruct".into(),
            api_key_env: Some("SPEECHJUDGE_API_KEY".into()),
            timeout_secs: 120,
        }
    }
}

pub struct HttpChatClient {
    config: HttpClientConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpChatClient {
    pub fn new(config: HttpClientConfig) -> Self {
        let api_key = config
            .api_key_env
            .as_deref()
            .and_then(|var| std::env::var(var).ok())
            .filter(|k| !k.is_empty());
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            config,
            api_key,
            agent,
        }
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    /// JSON body for `request`; unset sampling fields are omitted.
    pub fn request_body(&self, request: &ChatRequest) -> Value {
        let mut messages = Vec::new();
        if let Some(system) = &request.system {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": request.user}));
        let mut body = json!({
            "model": self.config.model,
            "messages": messages,
            "max_tokens": request.params.max_tokens,
        });
        let obj = body.as_object_mut().expect("object literal");
        if let Some(t) = request.params.temperature {
            obj.insert("temperature".into(), json!(t));
        }
        if let Some(p) = request.params.top_p {
            obj.insert("top_p".into(), json!(p));
        }
        if let Some(s) = request.params.seed {
            obj.insert("seed".into(), json!(s));
        }
        body
    }
}

impl GenerationClient for HttpChatClient {
    fn name(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, ClientError> {
        if network_forbidden() {
            return Err(ClientError::NetworkForbidden);
        }
        let mut call = self.agent.post(&self.endpoint());
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call
            .send_json(self.request_body(request))
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let code = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        if !(200..300).contains(&code) {
            return Err(ClientError::Status { code, body: text });
        }
        let parsed: Value =
            serde_json::from_str(&text).map_err(|e| ClientError::Malformed(e.to_string()))?;
        parsed
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ClientError::Malformed("missing choices[0].message.content".into()))
    }
}

#[cfg(test)]
pub(crate) use tests::ScriptedClient;
