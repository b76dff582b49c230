//! Language-pair profiles.
//!
//! A profile bundles the length rules applied to provider suggestions and
//! the IPA token inventory of the target language. CJK learner profiles
//! count characters; alphabetic ones count words.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthUnit {
    Characters,
    Words,
}

/// Inclusive length band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthBand {
    pub min: usize,
    pub max: usize,
}

impl LengthBand {
    pub const fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, len: usize) -> bool {
        (self.min..=self.max).contains(&len)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IpaInventory {
    pub vowels: BTreeSet<String>,
    pub consonants: BTreeSet<String>,
}

const EN_VOWELS: &[&str] = &[
    "i", "iː", "ɪ", "e", "eː", "ɛ", "æ", "a", "ɑ", "ɑː", "ɒ", "ɔ", "ɔː", "o", "oː", "ʊ", "u", "uː",
    "ʌ", "ə", "ɚ", "ɜ", "ɜː", "ɝ", "ɐ", "aɪ", "aʊ", "ɔɪ", "eɪ", "oʊ", "əʊ", "ɪə", "eə", "ɛə",
    "ʊə", "n̩", "l̩", "m̩",
];

const EN_CONSONANTS: &[&str] = &[
    "p", "b", "t", "d", "k", "g", "ɡ", "f", "v", "θ", "ð", "s", "z", "ʃ", "ʒ", "h", "tʃ", "dʒ", "m",
    "n", "ŋ", "l", "ɫ", "r", "ɹ", "ɾ", "j", "w", "ʍ", "x", "ʔ",
];

impl IpaInventory {
    /// General American / RP phoneme tokens.
    pub fn english() -> Self {
        Self {
            vowels: EN_VOWELS.iter().map(|s| s.to_string()).collect(),
            consonants: EN_CONSONANTS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vowels.contains(token) || self.consonants.contains(token)
    }

    /// Syllable nuclei are vowel tokens (including syllabic consonants).
    pub fn is_nucleus(&self, token: &str) -> bool {
        self.vowels.contains(token)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageProfile {
    pub id: String,
    pub unit: LengthUnit,
    /// Semantic-tree suggestion length.
    pub semantic_concept: LengthBand,
    /// Drawable visual element phrase length.
    pub visual_element: LengthBand,
    /// Scene relation sentence length.
    pub relation_sentence: LengthBand,
    /// Cap on chain node text.
    pub chain_text_max: usize,
    pub ipa: IpaInventory,
}

impl LanguageProfile {
    /// Chinese-speaking learners of English.
    pub fn zh() -> Self {
        Self {
            id: "zh".into(),
            unit: LengthUnit::Characters,
            semantic_concept: LengthBand::new(1, 5),
            visual_element: LengthBand::new(2, 6),
            relation_sentence: LengthBand::new(12, 26),
            chain_text_max: 40,
            ipa: IpaInventory::english(),
        }
    }

    /// Learners whose first language uses an alphabetic script (English prompts).
    pub fn en() -> Self {
        Self {
            id: "en".into(),
            unit: LengthUnit::Words,
            semantic_concept: LengthBand::new(1, 3),
            visual_element: LengthBand::new(1, 4),
            relation_sentence: LengthBand::new(4, 16),
            chain_text_max: 12,
            ipa: IpaInventory::english(),
        }
    }

    pub fn builtin(id: &str) -> Result<Self> {
        match id {
            "zh" => Ok(Self::zh()),
            "en" => Ok(Self::en()),
            other => Err(Error::Config(format!("unknown language profile `{other}`"))),
        }
    }

    /// Length of `text` in this profile's unit. Characters ignore whitespace
    /// and punctuation.
    pub fn measure(&self, text: &str) -> usize {
        match self.unit {
            LengthUnit::Characters => text.chars().filter(|c| c.is_alphanumeric()).count(),
            LengthUnit::Words => text.split_whitespace().count(),
        }
    }

    pub fn fits(&self, band: LengthBand, text: &str) -> bool {
        band.contains(self.measure(text))
    }
}
