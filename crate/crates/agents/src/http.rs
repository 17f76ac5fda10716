//! Live provider speaking the OpenAI-compatible chat/embeddings API.
//!
//! The API key is read from an environment variable named in the config, a
//! global minimum-interval rate limiter guards the endpoint, and transient
//! failures are retried with the attempt count surfaced in the error.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{AgentError, AgentResult};
use crate::provider::{DecodingOptions, Provider};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpProviderConfig {
    /// Base URL, e.g. `https://api.example.com/v1`.
    pub endpoint: String,
    pub model: String,
    /// Embedding model name; embedding capability is off when empty.
    pub embed_model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub requests_per_second: f64,
    pub max_retries: u32,
    pub timeout_seconds: u64,
}

impl Default for HttpProviderConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            embed_model: String::new(),
            api_key_env: "IVW_API_KEY".into(),
            requests_per_second: 1.0,
            max_retries: 2,
            timeout_seconds: 120,
        }
    }
}

pub struct HttpProvider {
    config: HttpProviderConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    last_request: Mutex<Option<Instant>>,
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> AgentResult<Self> {
        if config.endpoint.is_empty() || config.model.is_empty() {
            return Err(AgentError::InvalidInput(
                "http provider needs both an endpoint and a model name".into(),
            ));
        }
        let api_key = std::env::var(&config.api_key_env).ok();
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_seconds))
            .build()
            .map_err(|e| AgentError::Transport { attempts: 0, message: e.to_string() })?;
        Ok(Self { config, client, api_key, last_request: Mutex::new(None) })
    }

    fn throttle(&self) {
        if self.config.requests_per_second <= 0.0 {
            return;
        }
        let min_interval = Duration::from_secs_f64(1.0 / self.config.requests_per_second);
        let mut last = self.last_request.lock().expect("rate limiter poisoned");
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < min_interval {
                std::thread::sleep(min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn post(&self, path: &str, body: &serde_json::Value) -> AgentResult<serde_json::Value> {
        let url = format!("{}/{}", self.config.endpoint.trim_end_matches('/'), path);
        let mut attempts = 0;
        let mut last_message = String::new();
        while attempts <= self.config.max_retries {
            attempts += 1;
            self.throttle();
            let mut request = self.client.post(&url).json(body);
            if let Some(key) = &self.api_key {
                request = request.bearer_auth(key);
            }
            match request.send() {
                Ok(response) if response.status().is_success() => {
                    return response.json().map_err(|e| AgentError::Transport {
                        attempts,
                        message: format!("invalid json body: {e}"),
                    });
                }
                Ok(response) => {
                    let status = response.status();
                    last_message = format!("{status}: {}", response.text().unwrap_or_default());
                    // client errors other than rate limiting will not heal
                    if status.is_client_error() && status.as_u16() != 429 {
                        break;
                    }
                }
                Err(e) => last_message = e.to_string(),
            }
        }
        Err(AgentError::Transport { attempts, message: last_message })
    }
}

impl Provider for HttpProvider {
    fn name(&self) -> String {
        format!("http:{}:{}", self.config.endpoint, self.config.model)
    }

    fn complete(&self, prompt: &str, opts: &DecodingOptions) -> AgentResult<String> {
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": opts.temperature,
            "top_p": opts.top_p,
        });
        if let Some(max_tokens) = opts.max_tokens {
            body["max_tokens"] = json!(max_tokens);
        }
        let value = self.post("chat/completions", &body)?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(ToString::to_string)
            .ok_or_else(|| AgentError::Malformed(format!("unexpected completion payload: {value}")))
    }

    fn has_embedding(&self) -> bool {
        !self.config.embed_model.is_empty()
    }

    fn embed(&self, text: &str) -> AgentResult<Vec<f64>> {
        if !self.has_embedding() {
            return Err(AgentError::Capability("embedding".into()));
        }
        let body = json!({ "model": self.config.embed_model, "input": text });
        let value = self.post("embeddings", &body)?;
        value["data"][0]["embedding"]
            .as_array()
            .map(|items| items.iter().filter_map(|v| v.as_f64()).collect())
            .ok_or_else(|| AgentError::Malformed(format!("unexpected embedding payload: {value}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_incomplete_config() {
        match HttpProvider::new(HttpProviderConfig::default()) {
            Err(AgentError::InvalidInput(_)) => {}
            Err(other) => panic!("unexpected error {other:?}"),
            Ok(_) => panic!("config without endpoint must be rejected"),
        }
    }
}
