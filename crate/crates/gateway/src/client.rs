//! Chat-completion providers: the provider trait, an HTTP client for
//! OpenAI-compatible endpoints and its retry and concurrency policy.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::GatewayError;
use crate::prompt::Prompt;

pub const ENV_API_BASE: &str = "APF_API_BASE";
pub const DEFAULT_API_KEY_ENV: &str = "APF_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequestParams {
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    /// Attempts used, including the successful one.
    pub attempts: u32,
}

pub trait ChatProvider: Send + Sync {
    fn name(&self) -> &str;

    fn complete(&self, prompt: &Prompt, params: &RequestParams) -> Result<Completion, GatewayError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            initial_backoff_ms: 500,
            max_backoff_ms: 30_000,
            multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1`, where `attempt` starts at 1.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = self.multiplier.max(1.0).powi(attempt.saturating_sub(1) as i32);
        let ms = (self.initial_backoff_ms as f64 * factor).min(self.max_backoff_ms as f64);
        Duration::from_millis(ms as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub max_concurrency: usize,
    pub retry: RetryPolicy,
    pub timeout_ms: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            endpoint: std::env::var(ENV_API_BASE).unwrap_or_else(|_| "http://localhost:8000/v1".into()),
            model: "gpt-4o".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            max_concurrency: 4,
            retry: RetryPolicy::default(),
            timeout_ms: 120_000,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.endpoint.trim().is_empty() {
            return Err(GatewayError::InvalidConfig("endpoint is empty".into()));
        }
        if self.model.trim().is_empty() {
            return Err(GatewayError::InvalidConfig("model is empty".into()));
        }
        if self.max_concurrency == 0 {
            return Err(GatewayError::InvalidConfig("max_concurrency must be at least 1".into()));
        }
        if self.retry.max_attempts == 0 {
            return Err(GatewayError::InvalidConfig(
                "retry.max_attempts must be at least 1".into(),
            ));
        }
        if self.timeout_ms == 0 {
            return Err(GatewayError::InvalidConfig("timeout_ms must be positive".into()));
        }
        Ok(())
    }
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
pub struct Limiter {
    capacity: usize,
    in_use: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a> {
    limiter: &'a Limiter,
}

impl Limiter {
    pub fn new(capacity: usize) -> Self {
        Limiter {
            capacity: capacity.max(1),
            in_use: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut in_use = self.in_use.lock().expect("limiter lock");
        while *in_use >= self.capacity {
            in_use = self.freed.wait(in_use).expect("limiter lock");
        }
        *in_use += 1;
        Permit { limiter: self }
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.limiter.in_use.lock().expect("limiter lock") -= 1;
        self.limiter.freed.notify_one();
    }
}

pub struct HttpProvider {
    config: ProviderConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
    limiter: Limiter,
}

impl HttpProvider {
    pub fn new(config: ProviderConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build();
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let limiter = Limiter::new(config.max_concurrency);
        Ok(HttpProvider {
            config,
            agent,
            api_key,
            limiter,
        })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'))
    }

    fn attempt(&self, body: &Value) -> Result<String, GatewayError> {
        let mut request = self.agent.post(&self.url());
        if let Some(key) = &self.api_key {
            request = request.set("Authorization", &format!("Bearer {key}"));
        }
        match request.send_json(body.clone()) {
            Ok(response) => {
                let value: Value = response
                    .into_json()
                    .map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
                value
                    .pointer("/choices/0/message/content")
                    .and_then(Value::as_str)
                    .map(str::to_string)
                    .ok_or_else(|| GatewayError::MalformedResponse("missing choices[0].message.content".into()))
            }
            Err(ureq::Error::Status(status, response)) => Err(GatewayError::HttpError {
                status,
                body: response.into_string().unwrap_or_default(),
            }),
            Err(ureq::Error::Transport(t)) => {
                let msg = t.to_string();
                if msg.contains("timed out") || msg.contains("Timeout") {
                    Err(GatewayError::Timeout(msg))
                } else {
                    Err(GatewayError::Transport(msg))
                }
            }
        }
    }
}

impl ChatProvider for HttpProvider {
    fn name(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, prompt: &Prompt, params: &RequestParams) -> Result<Completion, GatewayError> {
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt.render()}],
            "temperature": params.temperature,
        });
        let max = self.config.retry.max_attempts;
        let mut attempt = 0;
        loop {
            attempt += 1;
            let result = {
                let _permit = self.limiter.acquire();
                self.attempt(&body)
            };
            match result {
                Ok(text) => {
                    return Ok(Completion {
                        text,
                        attempts: attempt,
                    })
                }
                Err(e) if !e.is_transient() => return Err(e),
                Err(e) if max == 1 => return Err(e),
                Err(e) if attempt >= max => {
                    let last_status = match &e {
                        GatewayError::HttpError { status, .. } => Some(*status),
                        _ => None,
                    };
                    return Err(GatewayError::ExhaustedRetries {
                        attempts: attempt,
                        last_status,
                        last: e.to_string(),
                    });
                }
                Err(_) => thread::sleep(self.config.retry.backoff(attempt)),
            }
        }
    }
}
