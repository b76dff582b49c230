//! Access to text and image providers: rendering, calls, validation and
//! retries.

pub mod extract;
#[cfg(feature = "live")]
pub mod http;
pub mod mock;
pub mod provider;
pub mod template;
pub mod validate;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::canvas::ImageRequest;
use crate::error::{Error, Result};
use crate::profile::LanguageProfile;
use provider::{ImageCall, Provider, ProviderConfig, ProviderMode, TextCall};
use template::{TemplateId, TemplateSet, Vars};
use validate::{Context, Payload};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_retries: u8,
    pub timeout_ms: u64,
}

impl GenerationParams {
    pub fn for_template(id: TemplateId, timeout_ms: u64) -> Self {
        Self {
            temperature: id.default_temperature(),
            max_retries: 1,
            timeout_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedImage {
    pub bytes: Vec<u8>,
    pub width: Option<u32>,
    pub height: Option<u32>,
}

/// Width and height from a PNG header.
pub fn png_dimensions(bytes: &[u8]) -> Option<(u32, u32)> {
    if bytes.len() < 24 || &bytes[..8] != b"\x89PNG\r\n\x1a\n" || &bytes[12..16] != b"IHDR" {
        return None;
    }
    let w = u32::from_be_bytes(bytes[16..20].try_into().ok()?);
    let h = u32::from_be_bytes(bytes[20..24].try_into().ok()?);
    Some((w, h))
}

/// Stateless per call; safe to share across sessions.
pub struct Gateway {
    provider: Arc<dyn Provider>,
    templates: TemplateSet,
    profile: LanguageProfile,
    config: ProviderConfig,
    params: BTreeMap<TemplateId, GenerationParams>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("mode", &self.provider.mode())
            .field("profile", &self.profile.id)
            .field("config", &self.config)
            .finish()
    }
}

impl Gateway {
    pub fn new(
        provider: Arc<dyn Provider>,
        templates: TemplateSet,
        profile: LanguageProfile,
        config: ProviderConfig,
    ) -> Self {
        let params = TemplateId::ALL
            .into_iter()
            .map(|id| (id, GenerationParams::for_template(id, config.timeout_ms)))
            .collect();
        Self {
            provider,
            templates,
            profile,
            config,
            params,
        }
    }

    pub fn with_params(mut self, id: TemplateId, params: GenerationParams) -> Result<Self> {
        if !(params.temperature >= 0.0) {
            return Err(Error::Config(format!("{id}: temperature must be >= 0")));
        }
        self.params.insert(id, params);
        Ok(self)
    }

    pub fn mode(&self) -> ProviderMode {
        self.provider.mode()
    }

    pub fn profile(&self) -> &LanguageProfile {
        &self.profile
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    pub fn params(&self, id: TemplateId) -> GenerationParams {
        self.params[&id]
    }

    /// Renders, calls and validates; invalid output is retried with the
    /// same prompt and parameters up to `max_retries` times.
    pub fn call_text(&self, id: TemplateId, vars: &Vars, exclude: &[String]) -> Result<Payload> {
        let params = self.params(id);
        let call = TextCall {
            template_id: id,
            messages: self.templates.render(id, vars)?,
            temperature: params.temperature,
            timeout_ms: params.timeout_ms,
            model: self.config.text_model.clone(),
        };
        let ctx = Context {
            profile: &self.profile,
            exclude,
        };
        let mut last = String::new();
        for attempt in 0..=params.max_retries {
            let raw = self.provider.complete(&call)?;
            match validate::validate(id, &raw, ctx) {
                Ok(payload) => return Ok(payload),
                Err(reason) => {
                    tracing::debug!(template = %id, attempt, %reason, "provider output rejected");
                    last = reason;
                }
            }
        }
        Err(Error::Format {
            template: id.to_string(),
            reason: last,
        })
    }

    pub fn call_image(&self, request: &ImageRequest) -> Result<GeneratedImage> {
        let limit = self.config.max_image_prompt_bytes;
        if request.prompt.len() > limit {
            return Err(Error::Provider(format!(
                "image prompt is {} bytes, the provider limit is {limit} bytes",
                request.prompt.len()
            )));
        }
        let call = ImageCall {
            prompt: request.prompt.clone(),
            timeout_ms: self.config.image_timeout_ms,
            model: self.config.image_model.clone(),
            size: self.config.image_size.clone(),
        };
        let bytes = self.provider.generate_image(&call)?;
        if bytes.is_empty() {
            return Err(Error::Provider("provider returned an empty image".into()));
        }
        let dims = png_dimensions(&bytes);
        Ok(GeneratedImage {
            width: dims.map(|d| d.0),
            height: dims.map(|d| d.1),
            bytes,
        })
    }
}
