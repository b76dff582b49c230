//! Immutable word cards recorded at the end of a session.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keywords::ChoiceOrigin;
use crate::lexicon::Sense;
use crate::session::LearningSession;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardSegment {
    pub start: usize,
    pub end: usize,
    pub ipa: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardKeyword {
    pub keyword: String,
    pub explanation: String,
    pub origin: ChoiceOrigin,
    pub segment: CardSegment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardLink {
    /// Endpoint labels in endpoint order.
    pub labels: [String; 2],
    pub chain: String,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardAssociation {
    pub sentence: String,
    pub links: Vec<CardLink>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardImage {
    pub image_ref: String,
    pub style: String,
    pub width: Option<u32>,
    pub height: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordCard {
    pub card_id: String,
    pub session_id: String,
    pub word: String,
    pub ipa: String,
    pub sense: Sense,
    pub keywords: Vec<CardKeyword>,
    pub association: CardAssociation,
    pub image: Option<CardImage>,
    pub total_active_ms: u64,
    pub created_at: u64,
    pub event_log_ref: String,
}

pub fn card_image_ref(card_id: &str) -> String {
    format!("cards/{card_id}.png")
}

pub fn event_log_ref(session_id: &str) -> String {
    format!("sessions/{session_id}/events.jsonl")
}

impl WordCard {
    /// Builds the card of a recorded session from its state alone.
    pub fn from_session(session: &LearningSession) -> Result<Self> {
        let card_id = session
            .card_id
            .clone()
            .ok_or_else(|| Error::InvalidArgument("session has not been recorded".into()))?;
        let created_at = session.events.last().map(|e| e.at).unwrap_or(session.started_at);
        let mut keywords: Vec<(usize, CardKeyword)> = session
            .choices
            .iter()
            .filter_map(|c| {
                let seg = session.segments.iter().find(|s| s.segment_id == c.segment_id)?;
                Some((
                    seg.start,
                    CardKeyword {
                        keyword: c.keyword.clone(),
                        explanation: c.explanation.clone(),
                        origin: c.origin,
                        segment: CardSegment {
                            start: seg.start,
                            end: seg.end,
                            ipa: seg.ipa(&session.word.phonemes),
                        },
                    },
                ))
            })
            .collect();
        keywords.sort_by_key(|(start, _)| *start);
        let map = &session.map;
        let label = |id: &str| map.node(id).map(|n| n.label.clone()).unwrap_or_default();
        let links = map
            .links
            .iter()
            .map(|l| CardLink {
                labels: [label(&l.endpoints[0]), label(&l.endpoints[1])],
                chain: l.chain.text.clone(),
                notes: l.notes.iter().map(|n| n.text.clone()).collect(),
            })
            .collect();
        let image = session.latest_image().map(|img| CardImage {
            image_ref: card_image_ref(&card_id),
            style: img.style.clone(),
            width: img.width,
            height: img.height,
        });
        Ok(WordCard {
            card_id,
            session_id: session.session_id.clone(),
            word: session.word.surface.clone(),
            ipa: session.word.phonemes.concat(),
            sense: session.sense.clone(),
            keywords: keywords.into_iter().map(|(_, k)| k).collect(),
            association: CardAssociation {
                sentence: map.association.clone(),
                links,
            },
            image,
            total_active_ms: session.total_active_ms,
            created_at,
            event_log_ref: event_log_ref(&session.session_id),
        })
    }
}
