//! Versioned prompt templates.
//!
//! A template file is a small header, a `---` line and the body:
//!
//! ```text
//! template: keyword_gen
//! version: 1
//! output: json_array_of_objects
//! variables: ipa, related
//! ---
//! body with {ipa} and {related}
//! ```
//!
//! `{name}` is a placeholder, `{{` and `}}` are literal braces and any other
//! brace is copied as is.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub type Vars = BTreeMap<String, Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    KeywordGen,
    KeywordReview,
    SemanticAssoc,
    AssocHints,
    ImageryRecommender,
    SceneRelation,
    ImageCompose,
}

impl TemplateId {
    pub const ALL: [TemplateId; 7] = [
        TemplateId::KeywordGen,
        TemplateId::KeywordReview,
        TemplateId::SemanticAssoc,
        TemplateId::AssocHints,
        TemplateId::ImageryRecommender,
        TemplateId::SceneRelation,
        TemplateId::ImageCompose,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::KeywordGen => "keyword_gen",
            TemplateId::KeywordReview => "keyword_review",
            TemplateId::SemanticAssoc => "semantic_assoc",
            TemplateId::AssocHints => "assoc_hints",
            TemplateId::ImageryRecommender => "imagery_recommender",
            TemplateId::SceneRelation => "scene_relation",
            TemplateId::ImageCompose => "image_compose",
        }
    }

    pub fn contract(self) -> OutputContract {
        match self {
            TemplateId::KeywordGen | TemplateId::KeywordReview | TemplateId::SemanticAssoc => {
                OutputContract::JsonArrayOfObjects
            }
            TemplateId::AssocHints | TemplateId::ImageryRecommender | TemplateId::SceneRelation => {
                OutputContract::JsonArrayOfStrings
            }
            TemplateId::ImageCompose => OutputContract::Image,
        }
    }

    /// Default sampling temperature for calls made with this template.
    pub fn default_temperature(self) -> f64 {
        match self {
            TemplateId::KeywordGen => 1.0,
            TemplateId::KeywordReview => 0.3,
            _ => 0.7,
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::UnknownTemplate(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputContract {
    JsonArrayOfObjects,
    JsonArrayOfStrings,
    PlainText,
    Image,
}

impl FromStr for OutputContract {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "json_array_of_objects" => Ok(Self::JsonArrayOfObjects),
            "json_array_of_strings" => Ok(Self::JsonArrayOfStrings),
            "plain_text" => Ok(Self::PlainText),
            "image" => Ok(Self::Image),
            other => Err(format!("unknown output contract `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Var(String),
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase() || c == '_')
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

fn tokenize(body: &str) -> Vec<Piece> {
    let mut pieces = Vec::new();
    let mut text = String::new();
    let mut rest = body;
    while let Some(c) = rest.chars().next() {
        if rest.starts_with("{{") {
            text.push('{');
            rest = &rest[2..];
        } else if rest.starts_with("}}") {
            text.push('}');
            rest = &rest[2..];
        } else if c == '{' {
            match rest[1..].find('}') {
                Some(end) if is_ident(&rest[1..1 + end]) => {
                    if !text.is_empty() {
                        pieces.push(Piece::Text(std::mem::take(&mut text)));
                    }
                    pieces.push(Piece::Var(rest[1..1 + end].to_string()));
                    rest = &rest[end + 2..];
                }
                _ => {
                    text.push('{');
                    rest = &rest[1..];
                }
            }
        } else {
            text.push(c);
            rest = &rest[c.len_utf8()..];
        }
    }
    if !text.is_empty() {
        pieces.push(Piece::Text(text));
    }
    pieces
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub version: u32,
    pub output: OutputContract,
    pub variables: Vec<String>,
    pub body: String,
    pieces: Vec<Piece>,
}

impl PromptTemplate {
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |template: &str, reason: String| Error::Template {
            template: template.to_string(),
            reason,
        };
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        let (header, body) = text
            .split_once("\n---\n")
            .ok_or_else(|| bad("?", "missing `---` separator after the header".into()))?;
        let mut fields = BTreeMap::new();
        for line in header.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once(':')
                .ok_or_else(|| bad("?", format!("malformed header line `{line}`")))?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let name = fields
            .get("template")
            .ok_or_else(|| bad("?", "header lacks `template`".into()))?
            .clone();
        let id: TemplateId = name.parse()?;
        let version = fields
            .get("version")
            .ok_or_else(|| bad(&name, "header lacks `version`".into()))?
            .parse::<u32>()
            .map_err(|e| bad(&name, format!("bad version: {e}")))?;
        let output: OutputContract = fields
            .get("output")
            .ok_or_else(|| bad(&name, "header lacks `output`".into()))?
            .parse()
            .map_err(|e| bad(&name, e))?;
        if output != id.contract() {
            return Err(bad(&name, format!("output must be {:?}", id.contract())));
        }
        let variables: Vec<String> = fields
            .get("variables")
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect()
            })
            .unwrap_or_default();
        let pieces = tokenize(body);
        let used: BTreeSet<&str> = pieces
            .iter()
            .filter_map(|p| match p {
                Piece::Var(v) => Some(v.as_str()),
                Piece::Text(_) => None,
            })
            .collect();
        let declared: BTreeSet<&str> = variables.iter().map(String::as_str).collect();
        if used != declared {
            return Err(bad(
                &name,
                format!("placeholders {used:?} do not match declared variables {declared:?}"),
            ));
        }
        Ok(Self {
            id,
            version,
            output,
            variables,
            body: body.to_string(),
            pieces,
        })
    }

    /// Strings are inserted verbatim, other values as compact JSON.
    pub fn render(&self, vars: &Vars) -> Result<String> {
        let mut out = String::with_capacity(self.body.len());
        for piece in &self.pieces {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Var(name) => match vars.get(name) {
                    Some(Value::String(s)) => out.push_str(s),
                    Some(other) => out.push_str(&other.to_string()),
                    None => {
                        return Err(Error::MissingVariable {
                            template: self.id.to_string(),
                            variable: name.clone(),
                        })
                    }
                },
            }
        }
        Ok(out)
    }

    pub fn render_messages(&self, vars: &Vars) -> Result<Vec<Message>> {
        Ok(vec![Message {
            role: "system".into(),
            content: self.render(vars)?,
        }])
    }
}

macro_rules! builtin {
    ($profile:literal) => {
        [
            include_str!(concat!("../../prompts/", $profile, "/keyword_gen.txt")),
            include_str!(concat!("../../prompts/", $profile, "/keyword_review.txt")),
            include_str!(concat!("../../prompts/", $profile, "/semantic_assoc.txt")),
            include_str!(concat!("../../prompts/", $profile, "/assoc_hints.txt")),
            include_str!(concat!("../../prompts/", $profile, "/imagery_recommender.txt")),
            include_str!(concat!("../../prompts/", $profile, "/scene_relation.txt")),
            include_str!(concat!("../../prompts/", $profile, "/image_compose.txt")),
        ]
    };
}

/// The seven templates of one language profile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub profile: String,
    templates: BTreeMap<TemplateId, PromptTemplate>,
}

impl TemplateSet {
    pub fn builtin(profile: &str) -> Result<Self> {
        let sources = match profile {
            "zh" => builtin!("zh"),
            "en" => builtin!("en"),
            other => return Err(Error::Config(format!("no built-in prompts for profile `{other}`"))),
        };
        let mut templates = BTreeMap::new();
        for src in sources {
            let t = PromptTemplate::parse(src)?;
            templates.insert(t.id, t);
        }
        Ok(Self {
            profile: profile.to_string(),
            templates,
        })
    }

    /// Built-in templates overridden by any `<dir>/<template_id>.txt`.
    pub fn load(dir: &Path, profile: &str) -> Result<Self> {
        let mut set = match Self::builtin(profile) {
            Ok(set) => set,
            Err(_) => Self {
                profile: profile.to_string(),
                templates: BTreeMap::new(),
            },
        };
        for id in TemplateId::ALL {
            let path = dir.join(format!("{id}.txt"));
            if path.is_file() {
                let t = PromptTemplate::parse(&std::fs::read_to_string(&path)?)?;
                if t.id != id {
                    return Err(Error::Template {
                        template: id.to_string(),
                        reason: format!("{} declares template `{}`", path.display(), t.id),
                    });
                }
                set.templates.insert(id, t);
            }
        }
        if let Some(id) = TemplateId::ALL.iter().find(|id| !set.templates.contains_key(id)) {
            return Err(Error::Config(format!(
                "profile `{profile}` has no `{id}` template in {}",
                dir.display()
            )));
        }
        Ok(set)
    }

    pub fn get(&self, id: TemplateId) -> Result<&PromptTemplate> {
        self.templates
            .get(&id)
            .ok_or_else(|| Error::UnknownTemplate(id.to_string()))
    }

    pub fn render(&self, id: TemplateId, vars: &Vars) -> Result<Vec<Message>> {
        self.get(id)?.render_messages(vars)
    }

    pub fn render_named(&self, id: &str, vars: &Vars) -> Result<Vec<Message>> {
        self.render(id.parse()?, vars)
    }
}

/// Builds a [`Vars`] map from `(name, value)` pairs.
pub fn vars<const N: usize>(pairs: [(&str, Value); N]) -> Vars {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}
