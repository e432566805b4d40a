use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{BackendError, ChatBackend, ChatRequest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before retry `i` is `backoff[i]`, the last entry repeating.
    #[serde(with = "millis")]
    pub backoff: Vec<Duration>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            backoff: vec![
                Duration::from_millis(500),
                Duration::from_secs(2),
                Duration::from_secs(8),
            ],
        }
    }
}

impl RetryPolicy {
    pub fn new(max_attempts: u32, backoff: Vec<Duration>) -> Result<Self, BackendError> {
        let policy = Self {
            max_attempts,
            backoff,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.max_attempts == 0 {
            return Err(BackendError::Config(
                "max_attempts must be at least 1".into(),
            ));
        }
        if self.backoff.windows(2).any(|w| w[1] < w[0]) {
            return Err(BackendError::Config(
                "backoff delays must be non-decreasing".into(),
            ));
        }
        Ok(())
    }

    fn delay_before(&self, retry: usize) -> Duration {
        self.backoff
            .get(retry)
            .or(self.backoff.last())
            .copied()
            .unwrap_or_default()
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Duration], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|d| d.as_millis() as u64))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Duration>, D::Error> {
        Ok(Vec::<u64>::deserialize(d)?
            .into_iter()
            .map(Duration::from_millis)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    /// Full chat-completions URL.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub retry: RetryPolicy,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o-mini".into(),
            temperature: 0.0,
            max_tokens: 1024,
            retry: RetryPolicy::default(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 120,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(BackendError::Config("temperature must be >= 0".into()));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::Config("max_tokens must be positive".into()));
        }
        self.retry.validate()
    }
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Client for an OpenAI-compatible chat-completions endpoint.
pub struct RemoteBackend {
    config: BackendConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    /// Reads the API key from the configured environment variable. A missing
    /// key is allowed for local endpoints that do not authenticate.
    pub fn new(config: BackendConfig) -> Result<Self, BackendError> {
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty());
        Self::with_api_key(config, api_key)
    }

    pub fn with_api_key(
        config: BackendConfig,
        api_key: Option<String>,
    ) -> Result<Self, BackendError> {
        config.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self {
            config,
            api_key,
            client,
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    fn request_body(&self, request: &ChatRequest<'_>) -> serde_json::Value {
        json!({
            "model": self.config.model,
            "messages": request.messages,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        })
    }

    /// Like [`ChatBackend::complete`] but also reports how many HTTP attempts
    /// were made.
    pub fn complete_with_attempts(
        &self,
        request: &ChatRequest<'_>,
    ) -> Result<(String, u32), BackendError> {
        let body = self.request_body(request);
        let max = self.config.retry.max_attempts;
        let mut attempt = 0;
        loop {
            attempt += 1;
            let mut builder = self.client.post(&self.config.endpoint).json(&body);
            if let Some(key) = &self.api_key {
                builder = builder.bearer_auth(key);
            }
            let retryable = match builder.send() {
                Err(e) => {
                    if attempt >= max {
                        return Err(BackendError::Transport {
                            attempts: attempt,
                            message: e.to_string(),
                        });
                    }
                    log::warn!("request attempt {attempt} failed: {e}");
                    true
                }
                Ok(response) => {
                    let status = response.status();
                    let text = response.text().map_err(|e| BackendError::Transport {
                        attempts: attempt,
                        message: e.to_string(),
                    })?;
                    if status.is_success() {
                        return parse_reply(&text, attempt).map(|r| (r, attempt));
                    }
                    let retry = status.is_server_error() || status.as_u16() == 429;
                    if !retry || attempt >= max {
                        return Err(BackendError::Api {
                            status: status.as_u16(),
                            body: excerpt(&text),
                            attempts: attempt,
                        });
                    }
                    log::warn!("request attempt {attempt} returned {status}");
                    true
                }
            };
            if retryable {
                std::thread::sleep(self.config.retry.delay_before(attempt as usize - 1));
            }
        }
    }
}

fn excerpt(body: &str) -> String {
    const LIMIT: usize = 300;
    match body.char_indices().nth(LIMIT) {
        Some((cut, _)) => format!("{}...", &body[..cut]),
        None => body.to_string(),
    }
}

fn parse_reply(body: &str, attempts: u32) -> Result<String, BackendError> {
    let parsed: CompletionResponse = serde_json::from_str(body).map_err(|e| BackendError::Api {
        status: 200,
        body: format!("unreadable completion body ({e}): {}", excerpt(body)),
        attempts,
    })?;
    let content = parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .unwrap_or_default();
    if content.trim().is_empty() {
        return Err(BackendError::EmptyReply);
    }
    Ok(content)
}

impl ChatBackend for RemoteBackend {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError> {
        self.complete_with_attempts(request).map(|(reply, _)| reply)
    }

    fn name(&self) -> &str {
        "remote"
    }
}
