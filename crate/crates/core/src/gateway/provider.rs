use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderRequest {
    pub model: String,
    pub system: String,
    pub user: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderReply {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProviderError {
    /// Worth retrying: timeouts, rate limiting, server errors.
    #[error("transient: {0}")]
    Transient(String),
    #[error("{0}")]
    Fatal(String),
    /// The provider answered but the reply cannot be decoded.
    #[error("malformed reply: {0}")]
    Malformed(String),
}

/// A chat-completion backend. Every request is self-contained.
pub trait Provider: Send + Sync {
    fn complete(&self, request: &ProviderRequest) -> Result<ProviderReply, ProviderError>;
}

/// JSON-over-HTTP adapter.
///
/// POSTs `{"model", "system", "user"}` to `endpoint` and expects
/// `{"text", "input_tokens", "output_tokens"}`. When `api_key_env` is set the
/// variable's value is sent as a bearer token.
pub struct HttpProvider {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(endpoint: &str, api_key_env: Option<&str>) -> Result<Self, ProviderError> {
        let api_key = match api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                ProviderError::Fatal(format!("credential variable {var} is not set"))
            })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| ProviderError::Fatal(e.to_string()))?;
        Ok(HttpProvider {
            endpoint: endpoint.to_string(),
            api_key,
            client,
        })
    }
}

impl Provider for HttpProvider {
    fn complete(&self, request: &ProviderRequest) -> Result<ProviderReply, ProviderError> {
        let mut builder = self.client.post(&self.endpoint).json(request);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder
            .send()
            .map_err(|e| ProviderError::Transient(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(ProviderError::Transient(format!("status {status}")));
        }
        if !status.is_success() {
            return Err(ProviderError::Fatal(format!("status {status}")));
        }
        response
            .json()
            .map_err(|e| ProviderError::Malformed(e.to_string()))
    }
}
