//! A scripted provider that replays fixtures in order.
//!
//! Fixture forms in a JSON script:
//!
//! - `{"text": "..."}` answers a text call
//! - `{"image_base64": "..."}` or `"placeholder_image"` answers an image call
//! - `{"error": "..."}` fails with a transport error
//! - `{"policy_refusal": "..."}` fails with a content-policy refusal
//! - `"timeout"` fails with a timeout

use std::path::Path;
use std::sync::Mutex;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::provider::{ImageCall, Provider, ProviderMode, TextCall};
use crate::error::{Error, Result};

/// A valid 1x1 RGBA PNG.
pub const PLACEHOLDER_PNG: &[u8] = &[
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52,
    0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x06, 0x00, 0x00, 0x00, 0x1f, 0x15, 0xc4,
    0x89, 0x00, 0x00, 0x00, 0x0b, 0x49, 0x44, 0x41, 0x54, 0x78, 0xda, 0x63, 0xf8, 0x0f, 0x04, 0x00,
    0x09, 0xfb, 0x03, 0xfd, 0x68, 0xfa, 0x1c, 0xcc, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44,
    0xae, 0x42, 0x60, 0x82,
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fixture {
    Text(String),
    Image(Vec<u8>),
    Error(String),
    PolicyRefusal(String),
    Timeout,
}

impl Fixture {
    pub fn text(s: impl Into<String>) -> Self {
        Fixture::Text(s.into())
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = || Error::Config(format!("unrecognized mock fixture {v}"));
        match v {
            Value::String(s) if s == "placeholder_image" => Ok(Fixture::Image(PLACEHOLDER_PNG.to_vec())),
            Value::String(s) if s == "timeout" => Ok(Fixture::Timeout),
            Value::Object(m) if m.len() == 1 => {
                let (k, val) = m.iter().next().expect("one entry");
                let s = val.as_str().ok_or_else(bad)?.to_string();
                match k.as_str() {
                    "text" => Ok(Fixture::Text(s)),
                    "image_base64" => base64::engine::general_purpose::STANDARD
                        .decode(s.trim())
                        .map(Fixture::Image)
                        .map_err(|e| Error::Config(format!("bad image_base64 fixture: {e}"))),
                    "error" => Ok(Fixture::Error(s)),
                    "policy_refusal" => Ok(Fixture::PolicyRefusal(s)),
                    _ => Err(bad()),
                }
            }
            _ => Err(bad()),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Fixture::Text(s) => serde_json::json!({ "text": s }),
            Fixture::Image(b) if b == PLACEHOLDER_PNG => Value::from("placeholder_image"),
            Fixture::Image(b) => {
                serde_json::json!({ "image_base64": base64::engine::general_purpose::STANDARD.encode(b) })
            }
            Fixture::Error(s) => serde_json::json!({ "error": s }),
            Fixture::PolicyRefusal(s) => serde_json::json!({ "policy_refusal": s }),
            Fixture::Timeout => Value::from("timeout"),
        }
    }
}

/// Reads a script: a JSON array of fixtures.
pub fn load_script(path: &Path) -> Result<Vec<Fixture>> {
    let text = std::fs::read_to_string(path)?;
    parse_script(&text)
}

pub fn parse_script(text: &str) -> Result<Vec<Fixture>> {
    match serde_json::from_str::<Value>(text)? {
        Value::Array(items) => items.iter().map(Fixture::from_json).collect(),
        _ => Err(Error::Config("a mock script is a JSON array".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedCall {
    /// Template id for text calls, `None` for image calls.
    pub template_id: Option<String>,
    pub prompt: String,
    pub temperature: Option<f64>,
}

#[derive(Debug, Default)]
struct State {
    script: Vec<Fixture>,
    served: usize,
    calls: Vec<RecordedCall>,
}

#[derive(Debug, Default)]
pub struct MockProvider {
    state: Mutex<State>,
}

impl MockProvider {
    pub fn new(script: Vec<Fixture>) -> Self {
        Self {
            state: Mutex::new(State {
                script,
                ..State::default()
            }),
        }
    }

    /// Appends fixtures to the end of the script.
    pub fn push(&self, fixtures: impl IntoIterator<Item = Fixture>) {
        self.state.lock().expect("mock state").script.extend(fixtures);
    }

    pub fn calls(&self) -> Vec<RecordedCall> {
        self.state.lock().expect("mock state").calls.clone()
    }

    pub fn served(&self) -> usize {
        self.state.lock().expect("mock state").served
    }

    pub fn remaining(&self) -> usize {
        let s = self.state.lock().expect("mock state");
        s.script.len() - s.served
    }

    fn next(&self, call: RecordedCall) -> Result<Fixture> {
        let mut s = self.state.lock().expect("mock state");
        s.calls.push(call);
        let fixture = s
            .script
            .get(s.served)
            .cloned()
            .ok_or(Error::ScriptExhausted { served: s.served })?;
        s.served += 1;
        Ok(fixture)
    }
}

fn failure(f: Fixture, timeout_ms: u64) -> Error {
    match f {
        Fixture::Error(m) => Error::Provider(m),
        Fixture::PolicyRefusal(m) => Error::ContentPolicy(m),
        Fixture::Timeout => Error::Timeout { ms: timeout_ms },
        Fixture::Text(_) => Error::Provider("mock script has a text fixture where an image was expected".into()),
        Fixture::Image(_) => Error::Provider("mock script has an image fixture where text was expected".into()),
    }
}

impl Provider for MockProvider {
    fn mode(&self) -> ProviderMode {
        ProviderMode::Mock
    }

    fn complete(&self, call: &TextCall) -> Result<String> {
        let prompt = call
            .messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        match self.next(RecordedCall {
            template_id: Some(call.template_id.to_string()),
            prompt,
            temperature: Some(call.temperature),
        })? {
            Fixture::Text(t) => Ok(t),
            other => Err(failure(other, call.timeout_ms)),
        }
    }

    fn generate_image(&self, call: &ImageCall) -> Result<Vec<u8>> {
        match self.next(RecordedCall {
            template_id: None,
            prompt: call.prompt.clone(),
            temperature: None,
        })? {
            Fixture::Image(b) => Ok(b),
            other => Err(failure(other, call.timeout_ms)),
        }
    }
}
