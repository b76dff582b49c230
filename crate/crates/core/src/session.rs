//! Per-word learning sessions.
//!
//! A session is event-sourced: every mutation is a [`Command`] that is
//! validated against a draft copy of the state and, on success, appended to
//! the event log. Replaying the log from the creation event rebuilds the
//! exact state, so snapshots are only a cache.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canvas::{BBox, CanvasElement, CanvasModel, CanvasRelation};
use crate::error::{Error, Result};
use crate::keywords::{
    KeywordBatch, KeywordCardDraft, KeywordChoice, KeywordSource, Segment, SemanticNode,
    SemanticTree, Origin,
};
use crate::lexicon::{Sense, WordEntry};
use crate::map::{AssociationLink, AssociationMap};
use crate::profile::{LanguageProfile, LengthUnit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Overview,
    KeywordSelection,
    Association,
    Imagery,
    Recorded,
}

/// The parts of a lexicon entry a session needs, copied in at creation so
/// the log replays without the lexicon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordSnapshot {
    pub word_id: String,
    pub surface: String,
    pub phonemes: Vec<String>,
}

/// Text limits captured from the language profile at creation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextRules {
    pub unit: LengthUnit,
    pub chain_text_max: usize,
}

impl TextRules {
    pub fn from_profile(profile: &LanguageProfile) -> Self {
        Self {
            unit: profile.unit,
            chain_text_max: profile.chain_text_max,
        }
    }

    pub fn measure(&self, text: &str) -> usize {
        match self.unit {
            LengthUnit::Characters => text.chars().filter(|c| c.is_alphanumeric()).count(),
            LengthUnit::Words => text.split_whitespace().count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub job_id: String,
    pub image_ref: String,
    pub style: String,
    pub width: Option<u32>,
    pub height: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub kind: String,
    pub payload: Value,
    pub at: u64,
}

impl SessionEvent {
    pub fn command(&self) -> Result<Command> {
        let tagged = serde_json::json!({ "kind": self.kind, "payload": self.payload });
        Ok(serde_json::from_value(tagged)?)
    }
}

/// Every state change a session accepts. The serialized form is the event
/// payload; `kind` is the operation name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Command {
    CreateSession {
        session_id: String,
        word: WordSnapshot,
        sense: Sense,
        rules: TextRules,
    },
    GotoStage {
        stage: Stage,
    },
    TickActive {
        delta_ms: u64,
    },
    BrushSegment {
        start: usize,
        end: usize,
    },
    ClearSegments {},
    AddSemanticNode {
        anchor_id: String,
        #[serde(default)]
        parent_id: Option<String>,
        concept: String,
        #[serde(default)]
        cue: String,
        #[serde(default)]
        translation: String,
        #[serde(default = "Origin::user")]
        origin: Origin,
    },
    /// Records a keyword suggestion batch that was shown to the learner.
    SuggestKeywords {
        segment_id: String,
        selected_node_ids: Vec<String>,
        cards: Vec<KeywordCardDraft>,
    },
    SelectKeyword {
        segment_id: String,
        source: KeywordSource,
        #[serde(default)]
        chain_node_ids: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        previous: Option<KeywordChoice>,
    },
    PropagateKeywordChange {
        keyword_id: String,
        source: KeywordSource,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        previous: Option<KeywordChoice>,
    },
    UpsertLink {
        node_a: String,
        node_b: String,
    },
    DeleteLink {
        link_id: String,
    },
    SetChain {
        link_id: String,
        text: String,
    },
    AddNote {
        link_id: String,
        text: String,
    },
    SetAssociation {
        text: String,
    },
    AddElement {
        bbox: BBox,
        tags: Vec<String>,
        #[serde(default)]
        description: String,
    },
    UpdateElement {
        element_id: String,
        #[serde(default)]
        bbox: Option<BBox>,
        #[serde(default)]
        tags: Option<Vec<String>>,
        #[serde(default)]
        description: Option<String>,
    },
    DeleteElement {
        element_id: String,
    },
    AddRelation {
        element_a: String,
        element_b: String,
        #[serde(default)]
        text: String,
    },
    DeleteRelation {
        relation_id: String,
    },
    AttachImage {
        job_id: String,
        image_ref: String,
        style: String,
        width: Option<u32>,
        height: Option<u32>,
    },
    RecordWordCard {
        card_id: String,
        #[serde(default)]
        allow_no_image: bool,
    },
}

impl Command {
    pub fn kind(&self) -> String {
        match serde_json::to_value(self) {
            Ok(Value::Object(map)) => map
                .get("kind")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string(),
            _ => String::new(),
        }
    }

    fn stage(&self) -> Option<Stage> {
        use Command::*;
        match self {
            CreateSession { .. } => Some(Stage::Overview),
            GotoStage { stage } => Some(*stage),
            TickActive { .. } => None,
            BrushSegment { .. }
            | ClearSegments {}
            | AddSemanticNode { .. }
            | SuggestKeywords { .. }
            | SelectKeyword { .. }
            | PropagateKeywordChange { .. } => Some(Stage::KeywordSelection),
            UpsertLink { .. }
            | DeleteLink { .. }
            | SetChain { .. }
            | AddNote { .. }
            | SetAssociation { .. } => Some(Stage::Association),
            AddElement { .. }
            | UpdateElement { .. }
            | DeleteElement { .. }
            | AddRelation { .. }
            | DeleteRelation { .. }
            | AttachImage { .. } => Some(Stage::Imagery),
            RecordWordCard { .. } => Some(Stage::Recorded),
        }
    }
}

/// What a successful command produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Applied {
    Nothing,
    Segment(Segment),
    SemanticNode(SemanticNode),
    Batch(KeywordBatch),
    Choice(KeywordChoice),
    Link(AssociationLink),
    Element(CanvasElement),
    Relation(CanvasRelation),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningSession {
    pub session_id: String,
    pub word: WordSnapshot,
    pub sense: Sense,
    pub rules: TextRules,
    pub stage: Stage,
    pub segments: Vec<Segment>,
    pub archived_segments: Vec<Segment>,
    pub choices: Vec<KeywordChoice>,
    pub archived_choices: Vec<KeywordChoice>,
    pub batches: Vec<KeywordBatch>,
    pub tree: SemanticTree,
    pub map: AssociationMap,
    pub canvas: CanvasModel,
    pub images: Vec<ImageRecord>,
    pub card_id: Option<String>,
    pub started_at: u64,
    pub total_active_ms: u64,
    pub events: Vec<SessionEvent>,
    pub(crate) id_seq: u64,
    pub(crate) color_cursor: u8,
}

impl LearningSession {
    pub fn create(
        session_id: impl Into<String>,
        entry: &WordEntry,
        sense_id: &str,
        profile: &LanguageProfile,
        at: u64,
    ) -> Result<Self> {
        let sense = entry
            .sense(sense_id)
            .ok_or_else(|| Error::UnknownSense(sense_id.to_string()))?
            .clone();
        let cmd = Command::CreateSession {
            session_id: session_id.into(),
            word: WordSnapshot {
                word_id: entry.word_id.clone(),
                surface: entry.surface.clone(),
                phonemes: entry.phonemes.clone(),
            },
            sense,
            rules: TextRules::from_profile(profile),
        };
        Self::from_create(cmd, at)
    }

    fn from_create(cmd: Command, at: u64) -> Result<Self> {
        let Command::CreateSession {
            session_id,
            word,
            sense,
            rules,
        } = cmd.clone()
        else {
            return Err(Error::InvalidArgument(
                "event log must start with create_session".into(),
            ));
        };
        let mut session = LearningSession {
            session_id,
            word,
            sense,
            rules,
            stage: Stage::Overview,
            segments: Vec::new(),
            archived_segments: Vec::new(),
            choices: Vec::new(),
            archived_choices: Vec::new(),
            batches: Vec::new(),
            tree: SemanticTree::default(),
            map: AssociationMap::default(),
            canvas: CanvasModel::default(),
            images: Vec::new(),
            card_id: None,
            started_at: at,
            total_active_ms: 0,
            events: Vec::new(),
            id_seq: 0,
            color_cursor: 0,
        };
        let meaning_id = session.next_id("cn");
        let label = session.sense.gloss_l1.clone();
        let sense_id = session.sense.sense_id.clone();
        session.map.add_meaning_node(meaning_id.clone(), label, sense_id);
        let surface = session.word.surface.clone();
        session.tree.add_meaning_anchor(meaning_id, surface);
        session.push_event(&cmd, at)?;
        Ok(session)
    }

    /// Rebuilds a session from its event log.
    pub fn replay(events: &[SessionEvent]) -> Result<Self> {
        let first = events
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty event log".into()))?;
        let mut session = Self::from_create(first.command()?, first.at)?;
        for event in &events[1..] {
            if event.seq != session.events.len() as u64 {
                return Err(Error::InvalidArgument(format!(
                    "event seq {} out of order",
                    event.seq
                )));
            }
            session.execute(event.command()?, event.at)?;
        }
        Ok(session)
    }

    pub fn is_recorded(&self) -> bool {
        self.stage == Stage::Recorded
    }

    pub(crate) fn next_id(&mut self, prefix: &str) -> String {
        self.id_seq += 1;
        format!("{prefix}-{:04}", self.id_seq)
    }

    fn push_event(&mut self, cmd: &Command, at: u64) -> Result<()> {
        let Value::Object(mut map) = serde_json::to_value(cmd)? else {
            unreachable!("commands serialize to objects");
        };
        let kind = map
            .remove("kind")
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        let payload = map.remove("payload").unwrap_or(Value::Object(Default::default()));
        self.events.push(SessionEvent {
            seq: self.events.len() as u64,
            kind,
            payload,
            at,
        });
        Ok(())
    }

    /// Validates and applies `cmd`. On error the session is unchanged; on
    /// success exactly one event is appended.
    pub fn execute(&mut self, mut cmd: Command, at: u64) -> Result<Applied> {
        if self.is_recorded() {
            return Err(Error::SessionClosed);
        }
        let events = std::mem::take(&mut self.events);
        let mut draft = self.clone();
        let outcome = draft.apply(&mut cmd, at);
        self.events = events;
        let applied = outcome?;
        draft.events = std::mem::take(&mut self.events);
        if let Some(stage) = cmd.stage() {
            draft.stage = stage;
        }
        draft.push_event(&cmd, at)?;
        *self = draft;
        Ok(applied)
    }

    fn apply(&mut self, cmd: &mut Command, at: u64) -> Result<Applied> {
        match cmd {
            Command::CreateSession { .. } => Err(Error::InvalidArgument(
                "create_session only starts a log".into(),
            )),
            Command::GotoStage { stage } => {
                if *stage == Stage::Recorded {
                    return Err(Error::InvalidArgument(
                        "use record_word_card to finish a session".into(),
                    ));
                }
                Ok(Applied::Nothing)
            }
            Command::TickActive { delta_ms } => {
                self.total_active_ms = self.total_active_ms.saturating_add(*delta_ms);
                Ok(Applied::Nothing)
            }
            Command::BrushSegment { start, end } => {
                self.apply_brush(*start, *end).map(Applied::Segment)
            }
            Command::ClearSegments {} => {
                self.apply_clear_segments();
                Ok(Applied::Nothing)
            }
            Command::AddSemanticNode {
                anchor_id,
                parent_id,
                concept,
                cue,
                translation,
                origin,
            } => self
                .apply_add_semantic_node(
                    anchor_id,
                    parent_id.as_deref(),
                    concept,
                    cue,
                    translation,
                    *origin,
                )
                .map(Applied::SemanticNode),
            Command::SuggestKeywords {
                segment_id,
                selected_node_ids,
                cards,
            } => self
                .apply_keyword_batch(segment_id, selected_node_ids, cards)
                .map(Applied::Batch),
            Command::SelectKeyword {
                segment_id,
                source,
                chain_node_ids,
                previous,
            } => {
                let (choice, prev) = self.apply_select_keyword(segment_id, source, chain_node_ids)?;
                *previous = prev;
                Ok(Applied::Choice(choice))
            }
            Command::PropagateKeywordChange {
                keyword_id,
                source,
                previous,
            } => {
                let (choice, prev) = self.apply_propagate(keyword_id, source)?;
                *previous = Some(prev);
                Ok(Applied::Choice(choice))
            }
            Command::UpsertLink { node_a, node_b } => {
                self.apply_upsert_link(node_a, node_b).map(Applied::Link)
            }
            Command::DeleteLink { link_id } => {
                self.apply_delete_link(link_id)?;
                Ok(Applied::Nothing)
            }
            Command::SetChain { link_id, text } => {
                self.apply_set_chain(link_id, text).map(Applied::Link)
            }
            Command::AddNote { link_id, text } => {
                self.apply_add_note(link_id, text, at).map(Applied::Link)
            }
            Command::SetAssociation { text } => {
                self.map.association = text.trim().to_string();
                Ok(Applied::Nothing)
            }
            Command::AddElement {
                bbox,
                tags,
                description,
            } => self
                .apply_add_element(*bbox, tags, description)
                .map(Applied::Element),
            Command::UpdateElement {
                element_id,
                bbox,
                tags,
                description,
            } => self
                .apply_update_element(element_id, *bbox, tags.as_deref(), description.as_deref())
                .map(Applied::Element),
            Command::DeleteElement { element_id } => {
                self.canvas.delete_element(element_id)?;
                Ok(Applied::Nothing)
            }
            Command::AddRelation {
                element_a,
                element_b,
                text,
            } => self
                .apply_add_relation(element_a, element_b, text)
                .map(Applied::Relation),
            Command::DeleteRelation { relation_id } => {
                self.canvas.delete_relation(relation_id)?;
                Ok(Applied::Nothing)
            }
            Command::AttachImage {
                job_id,
                image_ref,
                style,
                width,
                height,
            } => {
                self.images.push(ImageRecord {
                    job_id: job_id.clone(),
                    image_ref: image_ref.clone(),
                    style: style.clone(),
                    width: *width,
                    height: *height,
                });
                Ok(Applied::Nothing)
            }
            Command::RecordWordCard {
                card_id,
                allow_no_image,
            } => {
                if self.images.is_empty() && !*allow_no_image {
                    return Err(Error::NoImage);
                }
                self.card_id = Some(card_id.clone());
                Ok(Applied::Nothing)
            }
        }
    }

    // Typed wrappers over `execute`.

    pub fn goto_stage(&mut self, stage: Stage, at: u64) -> Result<()> {
        self.execute(Command::GotoStage { stage }, at).map(|_| ())
    }

    pub fn tick_active(&mut self, delta_ms: u64, at: u64) -> Result<u64> {
        self.execute(Command::TickActive { delta_ms }, at)?;
        Ok(self.total_active_ms)
    }

    pub fn brush_segment(&mut self, start: usize, end: usize, at: u64) -> Result<Segment> {
        match self.execute(Command::BrushSegment { start, end }, at)? {
            Applied::Segment(s) => Ok(s),
            other => unreachable!("{other:?}"),
        }
    }

    pub fn clear_segments(&mut self, at: u64) -> Result<()> {
        self.execute(Command::ClearSegments {}, at).map(|_| ())
    }

    #[allow(clippy::too_many_arguments)]
    pub fn add_semantic_node(
        &mut self,
        anchor_id: &str,
        parent_id: Option<&str>,
        concept: &str,
        cue: &str,
        translation: &str,
        origin: Origin,
        at: u64,
    ) -> Result<SemanticNode> {
        let cmd = Command::AddSemanticNode {
            anchor_id: anchor_id.into(),
            parent_id: parent_id.map(str::to_string),
            concept: concept.into(),
            cue: cue.into(),
            translation: translation.into(),
            origin,
        };
        match self.execute(cmd, at)? {
            Applied::SemanticNode(n) => Ok(n),
            other => unreachable!("{other:?}"),
        }
    }

    pub fn record_keyword_batch(
        &mut self,
        segment_id: &str,
        selected_node_ids: Vec<String>,
        cards: Vec<KeywordCardDraft>,
        at: u64,
    ) -> Result<KeywordBatch> {
        let cmd = Command::SuggestKeywords {
            segment_id: segment_id.into(),
            selected_node_ids,
            cards,
        };
        match self.execute(cmd, at)? {
            Applied::Batch(b) => Ok(b),
            other => unreachable!("{other:?}"),
        }
    }

    pub fn select_keyword(
        &mut self,
        segment_id: &str,
        source: KeywordSource,
        chain_node_ids: Vec<String>,
        at: u64,
    ) -> Result<KeywordChoice> {
        let cmd = Command::SelectKeyword {
            segment_id: segment_id.into(),
            source,
            chain_node_ids,
            previous: None,
        };
        match self.execute(cmd, at)? {
            Applied::Choice(c) => Ok(c),
            other => unreachable!("{other:?}"),
        }
    }

    pub fn propagate_keyword_change(
        &mut self,
        keyword_id: &str,
        source: KeywordSource,
        at: u64,
    ) -> Result<KeywordChoice> {
        let cmd = Command::PropagateKeywordChange {
            keyword_id: keyword_id.into(),
            source,
            previous: None,
        };
        match self.execute(cmd, at)? {
            Applied::Choice(c) => Ok(c),
            other => unreachable!("{other:?}"),
        }
    }

    pub fn upsert_link(&mut self, node_a: &str, node_b: &str, at: u64) -> Result<AssociationLink> {
        let cmd = Command::UpsertLink {
            node_a: node_a.into(),
            node_b: node_b.into(),
        };
        match self.execute(cmd, at)? {
            Applied::Link(l) => Ok(l),
            other => unreachable!("{other:?}"),
        }
    }

    pub fn delete_link(&mut self, link_id: &str, at: u64) -> Result<()> {
        self.execute(
            Command::DeleteLink {
                link_id: link_id.into(),
            },
            at,
        )
        .map(|_| ())
    }

    pub fn set_chain(&mut self, link_id: &str, text: &str, at: u64) -> Result<AssociationLink> {
        let cmd = Command::SetChain {
            link_id: link_id.into(),
            text: text.into(),
        };
        match self.execute(cmd, at)? {
            Applied::Link(l) => Ok(l),
            other => unreachable!("{other:?}"),
        }
    }

    pub fn add_note(&mut self, link_id: &str, text: &str, at: u64) -> Result<AssociationLink> {
        let cmd = Command::AddNote {
            link_id: link_id.into(),
            text: text.into(),
        };
        match self.execute(cmd, at)? {
            Applied::Link(l) => Ok(l),
            other => unreachable!("{other:?}"),
        }
    }

    pub fn set_association(&mut self, text: &str, at: u64) -> Result<()> {
        self.execute(Command::SetAssociation { text: text.into() }, at)
            .map(|_| ())
    }

    pub fn add_element(
        &mut self,
        bbox: BBox,
        tags: Vec<String>,
        description: &str,
        at: u64,
    ) -> Result<CanvasElement> {
        let cmd = Command::AddElement {
            bbox,
            tags,
            description: description.into(),
        };
        match self.execute(cmd, at)? {
            Applied::Element(e) => Ok(e),
            other => unreachable!("{other:?}"),
        }
    }

    pub fn update_element(
        &mut self,
        element_id: &str,
        bbox: Option<BBox>,
        tags: Option<Vec<String>>,
        description: Option<String>,
        at: u64,
    ) -> Result<CanvasElement> {
        let cmd = Command::UpdateElement {
            element_id: element_id.into(),
            bbox,
            tags,
            description,
        };
        match self.execute(cmd, at)? {
            Applied::Element(e) => Ok(e),
            other => unreachable!("{other:?}"),
        }
    }

    pub fn delete_element(&mut self, element_id: &str, at: u64) -> Result<()> {
        self.execute(
            Command::DeleteElement {
                element_id: element_id.into(),
            },
            at,
        )
        .map(|_| ())
    }

    pub fn add_relation(
        &mut self,
        element_a: &str,
        element_b: &str,
        text: &str,
        at: u64,
    ) -> Result<CanvasRelation> {
        let cmd = Command::AddRelation {
            element_a: element_a.into(),
            element_b: element_b.into(),
            text: text.into(),
        };
        match self.execute(cmd, at)? {
            Applied::Relation(r) => Ok(r),
            other => unreachable!("{other:?}"),
        }
    }

    pub fn delete_relation(&mut self, relation_id: &str, at: u64) -> Result<()> {
        self.execute(
            Command::DeleteRelation {
                relation_id: relation_id.into(),
            },
            at,
        )
        .map(|_| ())
    }

    pub fn attach_image(&mut self, record: ImageRecord, at: u64) -> Result<()> {
        let cmd = Command::AttachImage {
            job_id: record.job_id,
            image_ref: record.image_ref,
            style: record.style,
            width: record.width,
            height: record.height,
        };
        self.execute(cmd, at).map(|_| ())
    }

    pub fn record(&mut self, card_id: &str, allow_no_image: bool, at: u64) -> Result<()> {
        let cmd = Command::RecordWordCard {
            card_id: card_id.into(),
            allow_no_image,
        };
        self.execute(cmd, at).map(|_| ())
    }

    pub fn latest_image(&self) -> Option<&ImageRecord> {
        self.images.last()
    }
}
