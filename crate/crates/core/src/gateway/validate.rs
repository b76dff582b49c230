//! Per-template checks applied to parsed provider output. A payload only
//! leaves the gateway after passing these.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::extract::extract_array;
use super::template::TemplateId;
use crate::keywords::{KeywordCardDraft, CARDS_PER_BATCH};
use crate::profile::LanguageProfile;

/// Fewest stage-one candidates accepted.
pub const MIN_CANDIDATES: usize = 10;
/// Stage one asks for this many candidates; extras are dropped.
pub const MAX_CANDIDATES: usize = 20;
pub const MIN_HINTS: usize = 3;
pub const MAX_HINTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub keyword: String,
    #[serde(default)]
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptSuggestion {
    pub concept: String,
    #[serde(default)]
    pub translation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "items", rename_all = "snake_case")]
pub enum Payload {
    Candidates(Vec<Candidate>),
    Reviewed(Vec<KeywordCardDraft>),
    Concepts(Vec<ConceptSuggestion>),
    Sentences(Vec<String>),
}

/// Inputs the checks need beyond the raw text.
#[derive(Debug, Clone, Copy)]
pub struct Context<'a> {
    pub profile: &'a LanguageProfile,
    /// Keywords that must not come back from the reviewer.
    pub exclude: &'a [String],
}

fn text_field(v: &Value, keys: &[&str]) -> String {
    keys.iter()
        .find_map(|k| v.get(*k).and_then(Value::as_str))
        .map(|s| s.trim().to_string())
        .unwrap_or_default()
}

fn strings(items: &[Value]) -> Vec<String> {
    items
        .iter()
        .filter_map(Value::as_str)
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn dedup<T, K: std::hash::Hash + Eq>(items: Vec<T>, key: impl Fn(&T) -> K) -> Vec<T> {
    let mut seen = HashSet::new();
    items.into_iter().filter(|i| seen.insert(key(i))).collect()
}

/// Parses and checks `raw` for `id`; the error string explains a rejection.
pub fn validate(id: TemplateId, raw: &str, ctx: Context<'_>) -> Result<Payload, String> {
    let items = extract_array(raw).ok_or_else(|| "no JSON array in output".to_string())?;
    let profile = ctx.profile;
    match id {
        TemplateId::KeywordGen => {
            let candidates: Vec<Candidate> = items
                .iter()
                .map(|v| match v {
                    Value::String(s) => Candidate {
                        keyword: s.trim().to_string(),
                        explanation: String::new(),
                    },
                    other => Candidate {
                        keyword: text_field(other, &["keyword", "word"]),
                        explanation: text_field(other, &["explanation"]),
                    },
                })
                .filter(|c| !c.keyword.is_empty())
                .collect();
            let mut candidates = dedup(candidates, |c| c.keyword.clone());
            if candidates.len() < MIN_CANDIDATES {
                return Err(format!(
                    "{} usable candidates, at least {MIN_CANDIDATES} required",
                    candidates.len()
                ));
            }
            candidates.truncate(MAX_CANDIDATES);
            Ok(Payload::Candidates(candidates))
        }
        TemplateId::KeywordReview => {
            if items.len() != CARDS_PER_BATCH {
                return Err(format!("{} cards, exactly {CARDS_PER_BATCH} required", items.len()));
            }
            let cards: Vec<KeywordCardDraft> = items
                .iter()
                .map(|v| KeywordCardDraft {
                    keyword: text_field(v, &["keyword", "word"]),
                    explanation: text_field(v, &["explanation"]),
                    reasoning: text_field(v, &["reasoning", "reason"]),
                })
                .collect();
            if let Some(c) = cards
                .iter()
                .find(|c| c.keyword.is_empty() || c.explanation.is_empty() || c.reasoning.is_empty())
            {
                return Err(format!("card `{}` has an empty field", c.keyword));
            }
            if dedup(cards.clone(), |c| c.keyword.clone()).len() != cards.len() {
                return Err("duplicate keywords in review".into());
            }
            if let Some(c) = cards.iter().find(|c| ctx.exclude.contains(&c.keyword)) {
                return Err(format!("`{}` was already shown", c.keyword));
            }
            Ok(Payload::Reviewed(cards))
        }
        TemplateId::SemanticAssoc => {
            let concepts: Vec<ConceptSuggestion> = items
                .iter()
                .map(|v| match v {
                    Value::String(s) => ConceptSuggestion {
                        concept: s.trim().to_string(),
                        translation: String::new(),
                    },
                    other => ConceptSuggestion {
                        concept: text_field(other, &["concept", "word"]),
                        translation: text_field(other, &["translation", "gloss"]),
                    },
                })
                .filter(|c| !c.concept.is_empty() && profile.fits(profile.semantic_concept, &c.concept))
                .collect();
            let concepts = dedup(concepts, |c| c.concept.clone());
            if concepts.is_empty() {
                return Err("no concept within the length limit".into());
            }
            Ok(Payload::Concepts(concepts))
        }
        TemplateId::AssocHints => {
            let hints = dedup(strings(&items), |s| s.clone());
            if !(MIN_HINTS..=MAX_HINTS).contains(&hints.len()) {
                return Err(format!("{} hints, {MIN_HINTS} to {MAX_HINTS} required", hints.len()));
            }
            Ok(Payload::Sentences(hints))
        }
        TemplateId::ImageryRecommender | TemplateId::SceneRelation => {
            let band = if id == TemplateId::ImageryRecommender {
                profile.visual_element
            } else {
                profile.relation_sentence
            };
            let kept: Vec<String> = strings(&items)
                .into_iter()
                .filter(|s| profile.fits(band, s))
                .collect();
            let kept = dedup(kept, |s| s.clone());
            if kept.is_empty() {
                return Err(format!(
                    "no item of {} to {} {:?}",
                    band.min, band.max, profile.unit
                ));
            }
            Ok(Payload::Sentences(kept))
        }
        TemplateId::ImageCompose => Err("image templates have no text payload".into()),
    }
}
