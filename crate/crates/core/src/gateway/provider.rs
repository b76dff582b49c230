//! The provider abstraction and its configuration.

use serde::{Deserialize, Serialize};

use super::template::{Message, TemplateId};
use crate::error::Result;

pub const ENV_URL: &str = "WORDCRAFT_PROVIDER_URL";
pub const ENV_KEY: &str = "WORDCRAFT_PROVIDER_KEY";
pub const ENV_MODEL_TEXT: &str = "WORDCRAFT_MODEL_TEXT";
pub const ENV_MODEL_IMAGE: &str = "WORDCRAFT_MODEL_IMAGE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderMode {
    Live,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TextCall {
    pub template_id: TemplateId,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub timeout_ms: u64,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageCall {
    pub prompt: String,
    pub timeout_ms: u64,
    pub model: String,
    pub size: String,
}

/// Text and image generation backend. Implementations return
/// `Error::Provider`, `Error::Timeout`, `Error::ContentPolicy` or
/// `Error::ScriptExhausted`.
pub trait Provider: Send + Sync {
    fn mode(&self) -> ProviderMode;
    fn complete(&self, call: &TextCall) -> Result<String>;
    fn generate_image(&self, call: &ImageCall) -> Result<Vec<u8>>;
}

/// Connection settings. The credential is referenced by the name of the
/// environment variable that holds it and is never stored here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub base_url: String,
    pub credential_env: String,
    pub text_model: String,
    pub image_model: String,
    pub profile: String,
    pub timeout_ms: u64,
    pub image_timeout_ms: u64,
    /// Image prompts above this size are refused before any call.
    pub max_image_prompt_bytes: usize,
    pub image_size: String,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            credential_env: "OPENAI_API_KEY".into(),
            text_model: "gpt-4o".into(),
            image_model: "gpt-image-1".into(),
            profile: "zh".into(),
            timeout_ms: 60_000,
            image_timeout_ms: 180_000,
            max_image_prompt_bytes: 32_000,
            image_size: "1024x1024".into(),
        }
    }
}

impl ProviderConfig {
    /// Applies the `WORDCRAFT_*` environment variables over `self`.
    pub fn with_env(mut self) -> Self {
        self.apply_env(|k| std::env::var(k).ok());
        self
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        let non_empty = |k: &str| get(k).filter(|v| !v.trim().is_empty());
        if let Some(v) = non_empty(ENV_URL) {
            self.base_url = v;
        }
        if let Some(v) = non_empty(ENV_KEY) {
            self.credential_env = v;
        }
        if let Some(v) = non_empty(ENV_MODEL_TEXT) {
            self.text_model = v;
        }
        if let Some(v) = non_empty(ENV_MODEL_IMAGE) {
            self.image_model = v;
        }
    }
}

/// A string that never prints its content.
#[derive(Clone, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: String) -> Self {
        Self(value)
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Debug for Secret {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Secret(<redacted>)")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides() {
        let mut c = ProviderConfig::default();
        c.apply_env(|k| match k {
            ENV_URL => Some("http://localhost:9".into()),
            ENV_KEY => Some("MY_SECRET_VAR".into()),
            ENV_MODEL_TEXT => Some("  ".into()),
            _ => None,
        });
        assert_eq!(c.base_url, "http://localhost:9");
        assert_eq!(c.credential_env, "MY_SECRET_VAR");
        assert_eq!(c.text_model, "gpt-4o");
    }

    #[test]
    fn secret_debug_is_redacted() {
        let s = Secret::new("sk-live-123".into());
        assert!(!format!("{s:?}").contains("sk-live"));
        assert_eq!(s.expose(), "sk-live-123");
    }
}
