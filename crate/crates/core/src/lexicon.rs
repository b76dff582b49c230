//! Vocabulary entries: loading, validation, classification and screening.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::IpaInventory;

pub const IMAGEABILITY_MIN: f64 = 100.0;
pub const IMAGEABILITY_MAX: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sense {
    pub sense_id: String,
    /// Definition in the learner's language.
    pub gloss_l1: String,
    /// Definition in the target language.
    #[serde(default)]
    pub gloss_l2: String,
    #[serde(default)]
    pub examples: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordEntry {
    pub word_id: String,
    pub surface: String,
    pub phonemes: Vec<String>,
    pub syllable_count: u32,
    /// MRC-style rating in [100, 700]; missing ratings classify as low.
    pub imageability: Option<f64>,
    pub senses: Vec<Sense>,
    pub audio_ref: Option<String>,
}

impl WordEntry {
    pub fn sense(&self, sense_id: &str) -> Option<&Sense> {
        self.senses.iter().find(|s| s.sense_id == sense_id)
    }

    /// Phonemes joined into a display transcription.
    pub fn ipa(&self) -> String {
        self.phonemes.concat()
    }

    fn validate(&self, inventory: &IpaInventory) -> std::result::Result<(), String> {
        if self.word_id.trim().is_empty() {
            return Err("word_id is empty".into());
        }
        if self.surface.trim().is_empty() {
            return Err("surface is empty".into());
        }
        if self.phonemes.is_empty() {
            return Err("phonemes is empty".into());
        }
        for token in &self.phonemes {
            if token.is_empty() {
                return Err("empty phoneme token".into());
            }
            if !inventory.contains(token) {
                return Err(format!("phoneme `{token}` is not in the IPA inventory"));
            }
        }
        if self.senses.is_empty() {
            return Err("senses is empty".into());
        }
        let mut seen = HashSet::new();
        for sense in &self.senses {
            if !seen.insert(sense.sense_id.as_str()) {
                return Err(format!("duplicate sense_id `{}`", sense.sense_id));
            }
            if sense.gloss_l1.trim().is_empty() {
                return Err(format!("sense `{}` has an empty gloss_l1", sense.sense_id));
            }
        }
        if self.syllable_count == 0 {
            return Err("syllable_count must be at least 1".into());
        }
        if let Some(rating) = self.imageability {
            if !(IMAGEABILITY_MIN..=IMAGEABILITY_MAX).contains(&rating) {
                return Err(format!("imageability {rating} outside [100, 700]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageabilityClass {
    High,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthClass {
    Short,
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WordCategory {
    pub imageability_class: ImageabilityClass,
    pub length_class: LengthClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoffs {
    pub imageability: f64,
    pub syllables: u32,
}

impl Default for Cutoffs {
    fn default() -> Self {
        Self {
            imageability: 450.0,
            syllables: 2,
        }
    }
}

impl Cutoffs {
    pub fn new(imageability: f64, syllables: u32) -> Result<Self> {
        if !(imageability > 0.0) || syllables == 0 {
            return Err(Error::InvalidArgument("cutoffs must be positive".into()));
        }
        Ok(Self {
            imageability,
            syllables,
        })
    }
}

pub fn classify_word(entry: &WordEntry, cutoffs: Cutoffs) -> WordCategory {
    let imageability_class = match entry.imageability {
        Some(rating) if rating >= cutoffs.imageability => ImageabilityClass::High,
        _ => ImageabilityClass::Low,
    };
    let length_class = if entry.syllable_count <= cutoffs.syllables {
        LengthClass::Short
    } else {
        LengthClass::Long
    };
    WordCategory {
        imageability_class,
        length_class,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Familiarity {
    Known,
    Recognized,
    Unknown,
}

/// Keeps the candidates every participant rated as unknown, in input order.
pub fn screen_words(
    candidates: &[String],
    responses: &BTreeMap<String, HashMap<String, Familiarity>>,
) -> Result<Vec<String>> {
    let mut kept = Vec::new();
    for word_id in candidates {
        let mut unanimous = true;
        for (participant, answers) in responses {
            match answers.get(word_id) {
                None => {
                    return Err(Error::MissingResponse {
                        word_id: word_id.clone(),
                        participant: participant.clone(),
                    })
                }
                Some(Familiarity::Unknown) => {}
                Some(_) => unanimous = false,
            }
        }
        if unanimous {
            kept.push(word_id.clone());
        }
    }
    Ok(kept)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SyllableMismatch {
    pub word_id: String,
    pub stored: u32,
    pub nuclei: u32,
}

/// Immutable after load.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: Vec<WordEntry>,
    by_id: HashMap<String, usize>,
    by_surface: HashMap<String, usize>,
}

impl Lexicon {
    pub fn load(path: impl AsRef<Path>, inventory: &IpaInventory) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, inventory)
    }

    pub fn parse(text: &str, inventory: &IpaInventory) -> Result<Self> {
        let mut lexicon = Lexicon::default();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let entry: WordEntry = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: line_no,
                reason: e.to_string(),
            })?;
            entry.validate(inventory).map_err(|reason| Error::Parse {
                line: line_no,
                reason,
            })?;
            lexicon.insert(entry)?;
        }
        Ok(lexicon)
    }

    pub fn from_entries(entries: Vec<WordEntry>, inventory: &IpaInventory) -> Result<Self> {
        let mut lexicon = Lexicon::default();
        for (idx, entry) in entries.into_iter().enumerate() {
            entry.validate(inventory).map_err(|reason| Error::Parse {
                line: idx + 1,
                reason,
            })?;
            lexicon.insert(entry)?;
        }
        Ok(lexicon)
    }

    fn insert(&mut self, entry: WordEntry) -> Result<()> {
        if self.by_id.contains_key(&entry.word_id) {
            return Err(Error::DuplicateWordId(entry.word_id));
        }
        let idx = self.entries.len();
        self.by_id.insert(entry.word_id.clone(), idx);
        self.by_surface.entry(entry.surface.clone()).or_insert(idx);
        self.entries.push(entry);
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&serde_json::to_string(entry).expect("word entries serialize"));
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &WordEntry> {
        self.entries.iter()
    }

    pub fn get(&self, word_id: &str) -> Option<&WordEntry> {
        self.by_id.get(word_id).map(|&i| &self.entries[i])
    }

    pub fn by_surface(&self, surface: &str) -> Option<&WordEntry> {
        self.by_surface.get(surface).map(|&i| &self.entries[i])
    }

    /// Case-insensitive prefix matches first, then substring matches.
    pub fn search(&self, query: &str) -> Vec<&WordEntry> {
        let q = query.trim().to_lowercase();
        if q.is_empty() {
            return self.entries.iter().collect();
        }
        let (mut prefix, mut inner): (Vec<_>, Vec<_>) = (Vec::new(), Vec::new());
        for entry in &self.entries {
            let surface = entry.surface.to_lowercase();
            if surface.starts_with(&q) {
                prefix.push(entry);
            } else if surface.contains(&q) {
                inner.push(entry);
            }
        }
        prefix.extend(inner);
        prefix
    }

    /// Entries whose stored syllable count disagrees with the number of
    /// vowel-nucleus tokens. Advisory only.
    pub fn syllable_mismatches(&self, inventory: &IpaInventory) -> Vec<SyllableMismatch> {
        self.entries
            .iter()
            .filter_map(|e| {
                let nuclei = e.phonemes.iter().filter(|t| inventory.is_nucleus(t)).count() as u32;
                (nuclei != e.syllable_count).then(|| SyllableMismatch {
                    word_id: e.word_id.clone(),
                    stored: e.syllable_count,
                    nuclei,
                })
            })
            .collect()
    }
}
