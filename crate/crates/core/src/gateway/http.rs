//! OpenAI-compatible HTTP provider.

use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};

use super::provider::{ImageCall, Provider, ProviderConfig, ProviderMode, Secret, TextCall};
use crate::error::{Error, Result};

const POLICY_CODES: &[&str] = &["content_policy_violation", "moderation_blocked", "content_filter"];

pub struct HttpProvider {
    base_url: String,
    key: Secret,
    client: reqwest::blocking::Client,
}

impl std::fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpProvider")
            .field("base_url", &self.base_url)
            .field("key", &self.key)
            .finish()
    }
}

impl HttpProvider {
    /// Reads the credential from the environment variable named in `config`.
    pub fn from_config(config: &ProviderConfig) -> Result<Self> {
        let key = std::env::var(&config.credential_env).map_err(|_| {
            Error::Config(format!(
                "environment variable `{}` holding the provider credential is not set",
                config.credential_env
            ))
        })?;
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(Self {
            base_url: config.base_url.trim_end_matches('/').to_string(),
            key: Secret::new(key),
            client,
        })
    }

    fn post(&self, path: &str, body: &Value, timeout_ms: u64) -> Result<Value> {
        let response = self
            .client
            .post(format!("{}/{path}", self.base_url))
            .bearer_auth(self.key.expose())
            .timeout(Duration::from_millis(timeout_ms))
            .json(body)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    Error::Timeout { ms: timeout_ms }
                } else {
                    Error::Provider(format!("transport: {}", e.without_url()))
                }
            })?;
        let status = response.status();
        let value: Value = response
            .json()
            .map_err(|e| Error::Provider(format!("unreadable response ({status}): {}", e.without_url())))?;
        if status.is_success() {
            return Ok(value);
        }
        let err = &value["error"];
        let message = err["message"].as_str().unwrap_or("").to_string();
        let code = err["code"].as_str().or_else(|| err["type"].as_str()).unwrap_or("");
        if POLICY_CODES.contains(&code) {
            Err(Error::ContentPolicy(message))
        } else {
            Err(Error::Provider(format!("{status}: {code} {message}").trim().to_string()))
        }
    }
}

impl Provider for HttpProvider {
    fn mode(&self) -> ProviderMode {
        ProviderMode::Live
    }

    fn complete(&self, call: &TextCall) -> Result<String> {
        let body = json!({
            "model": call.model,
            "messages": call.messages,
            "temperature": call.temperature,
        });
        let value = self.post("chat/completions", &body, call.timeout_ms)?;
        let choice = &value["choices"][0];
        if choice["finish_reason"] == "content_filter" {
            return Err(Error::ContentPolicy("completion stopped by the content filter".into()));
        }
        choice["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Error::Provider("response has no message content".into()))
    }

    fn generate_image(&self, call: &ImageCall) -> Result<Vec<u8>> {
        let body = json!({
            "model": call.model,
            "prompt": call.prompt,
            "n": 1,
            "size": call.size,
        });
        let value = self.post("images/generations", &body, call.timeout_ms)?;
        let b64 = value["data"][0]["b64_json"]
            .as_str()
            .ok_or_else(|| Error::Provider("response has no b64_json image".into()))?;
        base64::engine::general_purpose::STANDARD
            .decode(b64)
            .map_err(|e| Error::Provider(format!("image is not valid base64: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_credential_is_config_error() {
        let config = ProviderConfig {
            credential_env: "WORDCRAFT_TEST_UNSET_CREDENTIAL".into(),
            ..ProviderConfig::default()
        };
        assert!(matches!(HttpProvider::from_config(&config), Err(Error::Config(_))));
    }
}
