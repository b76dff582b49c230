//! Service configuration, read from TOML.
//!
//! ```toml
//! port = 8080
//! data_dir = "data"
//! profile = "zh"
//! workers = 2
//!
//! [provider]
//! base_url = "https://api.openai.com/v1"
//! credential_env = "OPENAI_API_KEY"
//!
//! [generation.keyword_gen]
//! temperature = 1.0
//!
//! [styles]
//! ukiyo_e = "ukiyo-e woodblock print"
//! ```
//!
//! Relative paths resolve against the config file's directory. Prompt
//! overrides live in `<config_dir>/prompts/<profile>/<template_id>.txt`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::canvas::StyleRegistry;
use crate::error::{Error, Result};
use crate::gateway::provider::ProviderConfig;
use crate::gateway::template::{TemplateId, TemplateSet};
use crate::gateway::GenerationParams;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationOverride {
    pub temperature: Option<f64>,
    pub max_retries: Option<u8>,
    pub timeout_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub port: u16,
    pub data_dir: PathBuf,
    pub profile: String,
    /// NDJSON lexicon; the bundled word list is used when unset.
    pub lexicon: Option<PathBuf>,
    pub prompts_dir: Option<PathBuf>,
    pub workers: usize,
    pub provider: ProviderConfig,
    pub generation: BTreeMap<String, GenerationOverride>,
    pub styles: BTreeMap<String, String>,
    /// Reserved: name of an environment variable holding a bearer token.
    pub auth_token_env: Option<String>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            port: 8080,
            data_dir: PathBuf::from("data"),
            profile: "zh".into(),
            lexicon: None,
            prompts_dir: None,
            workers: 2,
            provider: ProviderConfig::default(),
            generation: BTreeMap::new(),
            styles: BTreeMap::new(),
            auth_token_env: None,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &PathBuf| if p.is_relative() { base.join(p) } else { p.clone() };
        config.data_dir = resolve(&config.data_dir);
        config.lexicon = config.lexicon.as_ref().map(resolve);
        config.prompts_dir = Some(
            config
                .prompts_dir
                .as_ref()
                .map(resolve)
                .unwrap_or_else(|| base.join("prompts")),
        );
        Ok(config)
    }

    /// Templates for the configured profile, with any file overrides.
    pub fn templates(&self) -> Result<TemplateSet> {
        match &self.prompts_dir {
            Some(dir) if dir.join(&self.profile).is_dir() => TemplateSet::load(&dir.join(&self.profile), &self.profile),
            _ => TemplateSet::builtin(&self.profile),
        }
    }

    pub fn style_registry(&self) -> StyleRegistry {
        let mut styles = StyleRegistry::default();
        for (id, prompt) in &self.styles {
            styles.insert(id, prompt);
        }
        styles
    }

    pub fn generation_params(&self) -> Result<Vec<(TemplateId, GenerationParams)>> {
        self.generation
            .iter()
            .map(|(name, o)| {
                let id: TemplateId = name
                    .parse()
                    .map_err(|_| Error::Config(format!("unknown template `{name}` in [generation]")))?;
                let mut p = GenerationParams::for_template(id, self.provider.timeout_ms);
                if let Some(t) = o.temperature {
                    p.temperature = t;
                }
                if let Some(r) = o.max_retries {
                    p.max_retries = r;
                }
                if let Some(ms) = o.timeout_ms {
                    p.timeout_ms = ms;
                }
                Ok((id, p))
            })
            .collect()
    }
}
