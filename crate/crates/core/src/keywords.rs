//! Phonological segments, the semantic brainstorming tree, keyword cards and
//! keyword choices.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::LearningSession;

/// Number of distinct segment colors.
pub const SEGMENT_PALETTE: u8 = 8;
/// Semantic nodes sit at depth 1 or 2 below their anchor.
pub const MAX_TREE_DEPTH: u8 = 2;
/// Cards per keyword suggestion batch.
pub const CARDS_PER_BATCH: usize = 4;
/// Separator used when a semantic chain seeds a chain node.
pub const CHAIN_SEPARATOR: &str = " → ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentState {
    Active,
    Archived,
}

/// A brushed half-open range `[start, end)` over the word's phonemes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub segment_id: String,
    pub start: usize,
    pub end: usize,
    pub color_index: u8,
    pub state: SegmentState,
}

impl Segment {
    pub fn overlaps(&self, start: usize, end: usize) -> bool {
        self.start < end && start < self.end
    }

    pub fn ipa(&self, phonemes: &[String]) -> String {
        phonemes[self.start..self.end].concat()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    User,
    Suggested,
}

impl Origin {
    pub(crate) fn user() -> Self {
        Origin::User
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorKind {
    Meaning,
    Keyword,
}

/// Root of a brainstorming tree. Anchor ids are the ids of the concept nodes
/// they stand for in the association map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeAnchor {
    pub anchor_id: String,
    pub kind: AnchorKind,
    pub concept: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticNode {
    pub node_id: String,
    pub anchor_id: String,
    pub parent_id: Option<String>,
    pub concept: String,
    pub cue: String,
    pub translation: String,
    pub origin: Origin,
    pub depth: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticTree {
    pub anchors: Vec<TreeAnchor>,
    pub nodes: Vec<SemanticNode>,
    pub archived_anchors: Vec<TreeAnchor>,
    pub archived_nodes: Vec<SemanticNode>,
}

impl SemanticTree {
    pub(crate) fn add_meaning_anchor(&mut self, anchor_id: String, concept: String) {
        self.anchors.push(TreeAnchor {
            anchor_id,
            kind: AnchorKind::Meaning,
            concept,
        });
    }

    pub fn anchor(&self, anchor_id: &str) -> Option<&TreeAnchor> {
        self.anchors.iter().find(|a| a.anchor_id == anchor_id)
    }

    pub fn node(&self, node_id: &str) -> Option<&SemanticNode> {
        self.nodes.iter().find(|n| n.node_id == node_id)
    }

    pub fn concepts_under(&self, anchor_id: &str) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|n| n.anchor_id == anchor_id)
            .map(|n| n.concept.as_str())
            .collect()
    }

    pub fn max_depth(&self) -> u8 {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    fn archive_anchor(&mut self, anchor_id: &str) {
        if let Some(pos) = self.anchors.iter().position(|a| a.anchor_id == anchor_id) {
            let anchor = self.anchors.remove(pos);
            self.archived_anchors.push(anchor);
        }
        let (gone, kept): (Vec<_>, Vec<_>) = std::mem::take(&mut self.nodes)
            .into_iter()
            .partition(|n| n.anchor_id == anchor_id);
        self.nodes = kept;
        self.archived_nodes.extend(gone);
    }
}

/// Provider output for one card before it is given ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordCardDraft {
    pub keyword: String,
    pub explanation: String,
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordCard {
    pub card_id: String,
    pub keyword: String,
    pub explanation: String,
    pub reasoning: String,
    pub source_segment_id: String,
    pub source_node_ids: Vec<String>,
    pub batch_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordBatch {
    pub batch_id: String,
    pub segment_id: String,
    pub cards: Vec<KeywordCard>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceOrigin {
    User,
    Card,
}

/// Where a selected keyword comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KeywordSource {
    Card {
        card_id: String,
    },
    User {
        keyword: String,
        #[serde(default)]
        explanation: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordChoice {
    pub keyword_id: String,
    pub segment_id: String,
    pub keyword: String,
    pub explanation: String,
    pub origin: ChoiceOrigin,
    pub card_id: Option<String>,
    /// Concepts from the anchor down to the chosen semantic node.
    pub chain: Vec<String>,
    /// The keyword's concept node in the association map.
    pub node_id: String,
}

impl LearningSession {
    pub fn active_segment(&self, segment_id: &str) -> Option<&Segment> {
        self.segments
            .iter()
            .find(|s| s.segment_id == segment_id && s.state == SegmentState::Active)
    }

    pub fn choice_for_segment(&self, segment_id: &str) -> Option<&KeywordChoice> {
        self.choices.iter().find(|c| c.segment_id == segment_id)
    }

    pub fn choice(&self, keyword_id: &str) -> Option<&KeywordChoice> {
        self.choices.iter().find(|c| c.keyword_id == keyword_id)
    }

    pub fn card(&self, card_id: &str) -> Option<&KeywordCard> {
        self.batches
            .iter()
            .flat_map(|b| b.cards.iter())
            .find(|c| c.card_id == card_id)
    }

    /// Every keyword shown in any batch of this session, in order.
    pub fn shown_keywords(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.batches
            .iter()
            .flat_map(|b| b.cards.iter())
            .filter(|c| seen.insert(c.keyword.clone()))
            .map(|c| c.keyword.clone())
            .collect()
    }

    pub(crate) fn apply_brush(&mut self, start: usize, end: usize) -> Result<Segment> {
        let len = self.word.phonemes.len();
        if start >= end || end > len {
            return Err(Error::Range { start, end, len });
        }
        if let Some(hit) = self.segments.iter().find(|s| s.overlaps(start, end)) {
            return Err(Error::Overlap {
                start,
                end,
                segment_id: hit.segment_id.clone(),
            });
        }
        let in_use: HashSet<u8> = self.segments.iter().map(|s| s.color_index).collect();
        let color_index = (0..SEGMENT_PALETTE)
            .map(|i| (self.color_cursor + i) % SEGMENT_PALETTE)
            .find(|c| !in_use.contains(c))
            .ok_or(Error::PaletteExhausted)?;
        self.color_cursor = (color_index + 1) % SEGMENT_PALETTE;
        let segment = Segment {
            segment_id: self.next_id("seg"),
            start,
            end,
            color_index,
            state: SegmentState::Active,
        };
        self.segments.push(segment.clone());
        Ok(segment)
    }

    /// Moves every active segment, and the keyword chosen for it, into the
    /// archives. Map nodes, links and canvas tags that depended on those
    /// keywords follow them.
    pub(crate) fn apply_clear_segments(&mut self) {
        for mut segment in std::mem::take(&mut self.segments) {
            if let Some(pos) = self
                .choices
                .iter()
                .position(|c| c.segment_id == segment.segment_id)
            {
                let choice = self.choices.remove(pos);
                self.map.archive_node(&choice.node_id);
                self.canvas.strip_tag(&choice.node_id);
                self.tree.archive_anchor(&choice.node_id);
                self.archived_choices.push(choice);
            }
            segment.state = SegmentState::Archived;
            self.archived_segments.push(segment);
        }
    }

    pub(crate) fn apply_add_semantic_node(
        &mut self,
        anchor_id: &str,
        parent_id: Option<&str>,
        concept: &str,
        cue: &str,
        translation: &str,
        origin: Origin,
    ) -> Result<SemanticNode> {
        if self.tree.anchor(anchor_id).is_none() {
            return Err(Error::UnknownAnchor(anchor_id.to_string()));
        }
        let depth = match parent_id {
            None => 1,
            Some(pid) => {
                let parent = self
                    .tree
                    .node(pid)
                    .ok_or_else(|| Error::UnknownSemanticNode(pid.to_string()))?;
                if parent.anchor_id != anchor_id {
                    return Err(Error::InvalidArgument(format!(
                        "parent `{pid}` belongs to a different anchor"
                    )));
                }
                parent.depth + 1
            }
        };
        if depth > MAX_TREE_DEPTH {
            return Err(Error::DepthExceeded {
                max: MAX_TREE_DEPTH,
            });
        }
        let concept = concept.trim();
        if concept.is_empty() {
            return Err(Error::InvalidArgument("concept is empty".into()));
        }
        if self.tree.concepts_under(anchor_id).contains(&concept) {
            return Err(Error::DuplicateConcept(concept.to_string()));
        }
        let node = SemanticNode {
            node_id: self.next_id("sn"),
            anchor_id: anchor_id.to_string(),
            parent_id: parent_id.map(str::to_string),
            concept: concept.to_string(),
            cue: cue.trim().to_string(),
            translation: translation.trim().to_string(),
            origin,
            depth,
        };
        self.tree.nodes.push(node.clone());
        Ok(node)
    }

    pub(crate) fn apply_keyword_batch(
        &mut self,
        segment_id: &str,
        selected_node_ids: &[String],
        drafts: &[KeywordCardDraft],
    ) -> Result<KeywordBatch> {
        if self.active_segment(segment_id).is_none() {
            return Err(Error::UnknownSegment(segment_id.to_string()));
        }
        for id in selected_node_ids {
            if self.tree.node(id).is_none() {
                return Err(Error::UnknownSemanticNode(id.clone()));
            }
        }
        if drafts.len() != CARDS_PER_BATCH {
            return Err(Error::InvalidArgument(format!(
                "a batch holds {CARDS_PER_BATCH} cards, got {}",
                drafts.len()
            )));
        }
        let shown: HashSet<String> = self.shown_keywords().into_iter().collect();
        let mut fresh = HashSet::new();
        for d in drafts {
            if d.keyword.trim().is_empty() || d.explanation.trim().is_empty() || d.reasoning.trim().is_empty() {
                return Err(Error::InvalidArgument("card fields must be non-empty".into()));
            }
            if shown.contains(&d.keyword) || !fresh.insert(d.keyword.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "keyword `{}` was already shown",
                    d.keyword
                )));
            }
        }
        let batch_id = self.next_id("kb");
        let cards = drafts
            .iter()
            .map(|d| KeywordCard {
                card_id: self.next_id("kc"),
                keyword: d.keyword.clone(),
                explanation: d.explanation.clone(),
                reasoning: d.reasoning.clone(),
                source_segment_id: segment_id.to_string(),
                source_node_ids: selected_node_ids.to_vec(),
                batch_id: batch_id.clone(),
            })
            .collect();
        let batch = KeywordBatch {
            batch_id,
            segment_id: segment_id.to_string(),
            cards,
        };
        self.batches.push(batch.clone());
        Ok(batch)
    }

    /// Resolves a chain of semantic node ids into concept text, anchor first.
    fn resolve_chain(&self, node_ids: &[String]) -> Result<Vec<String>> {
        if node_ids.is_empty() {
            return Ok(Vec::new());
        }
        let mut concepts = Vec::with_capacity(node_ids.len() + 1);
        let mut anchor_id: Option<&str> = None;
        let mut parent: Option<&str> = None;
        for id in node_ids {
            let node = self
                .tree
                .node(id)
                .ok_or_else(|| Error::UnknownSemanticNode(id.clone()))?;
            if node.parent_id.as_deref() != parent {
                return Err(Error::InvalidChain(format!(
                    "`{id}` does not continue the chain"
                )));
            }
            if let Some(a) = anchor_id {
                if a != node.anchor_id {
                    return Err(Error::InvalidChain("nodes under different anchors".into()));
                }
            } else {
                anchor_id = Some(&node.anchor_id);
                let anchor = self
                    .tree
                    .anchor(&node.anchor_id)
                    .ok_or_else(|| Error::UnknownAnchor(node.anchor_id.clone()))?;
                concepts.push(anchor.concept.clone());
            }
            concepts.push(node.concept.clone());
            parent = Some(&node.node_id);
        }
        Ok(concepts)
    }

    fn resolve_source(
        &self,
        segment_id: &str,
        source: &KeywordSource,
    ) -> Result<(String, String, ChoiceOrigin, Option<String>)> {
        match source {
            KeywordSource::Card { card_id } => {
                let card = self
                    .card(card_id)
                    .filter(|c| c.source_segment_id == segment_id)
                    .ok_or_else(|| Error::UnknownCard(card_id.clone()))?;
                Ok((
                    card.keyword.clone(),
                    card.explanation.clone(),
                    ChoiceOrigin::Card,
                    Some(card.card_id.clone()),
                ))
            }
            KeywordSource::User {
                keyword,
                explanation,
            } => {
                let keyword = keyword.trim();
                if keyword.is_empty() {
                    return Err(Error::InvalidArgument("keyword is empty".into()));
                }
                Ok((
                    keyword.to_string(),
                    explanation.trim().to_string(),
                    ChoiceOrigin::User,
                    None,
                ))
            }
        }
    }

    /// Returns the stored choice and, when a previous choice was replaced,
    /// that previous choice.
    pub(crate) fn apply_select_keyword(
        &mut self,
        segment_id: &str,
        source: &KeywordSource,
        chain_node_ids: &[String],
    ) -> Result<(KeywordChoice, Option<KeywordChoice>)> {
        if self.active_segment(segment_id).is_none() {
            return Err(Error::UnknownSegment(segment_id.to_string()));
        }
        let chain = self.resolve_chain(chain_node_ids)?;
        if let Some(existing) = self.choice_for_segment(segment_id).cloned() {
            let (mut choice, previous) = self.apply_propagate(&existing.keyword_id, source)?;
            if !chain.is_empty() {
                choice.chain = chain;
                let stored = self
                    .choices
                    .iter_mut()
                    .find(|c| c.keyword_id == choice.keyword_id)
                    .expect("choice just updated");
                stored.chain = choice.chain.clone();
            }
            return Ok((choice, Some(previous)));
        }
        let (keyword, explanation, origin, card_id) = self.resolve_source(segment_id, source)?;
        let keyword_id = self.next_id("kw");
        let node_id = self.next_id("cn");
        self.map
            .add_keyword_node(node_id.clone(), keyword.clone(), keyword_id.clone());
        self.tree.anchors.push(TreeAnchor {
            anchor_id: node_id.clone(),
            kind: AnchorKind::Keyword,
            concept: keyword.clone(),
        });
        let meaning_id = self.map.meaning_node().node_id.clone();
        let link_id = self.next_id("ln");
        self.map
            .insert_link(link_id, &node_id, &meaning_id, chain.join(CHAIN_SEPARATOR));
        let choice = KeywordChoice {
            keyword_id,
            segment_id: segment_id.to_string(),
            keyword,
            explanation,
            origin,
            card_id,
            chain,
            node_id,
        };
        self.choices.push(choice.clone());
        Ok((choice, None))
    }

    /// Renames a selected keyword everywhere it appears. Topology, chains
    /// and notes are untouched.
    pub(crate) fn apply_propagate(
        &mut self,
        keyword_id: &str,
        source: &KeywordSource,
    ) -> Result<(KeywordChoice, KeywordChoice)> {
        let previous = self
            .choice(keyword_id)
            .cloned()
            .ok_or_else(|| Error::UnknownKeyword(keyword_id.to_string()))?;
        let (keyword, explanation, origin, card_id) =
            self.resolve_source(&previous.segment_id, source)?;
        let stored = self
            .choices
            .iter_mut()
            .find(|c| c.keyword_id == keyword_id)
            .expect("checked above");
        stored.keyword = keyword.clone();
        stored.explanation = explanation;
        stored.origin = origin;
        stored.card_id = card_id;
        let updated = stored.clone();
        self.map.relabel(&previous.node_id, &keyword);
        if let Some(anchor) = self
            .tree
            .anchors
            .iter_mut()
            .find(|a| a.anchor_id == previous.node_id)
        {
            anchor.concept = keyword;
        }
        Ok((updated, previous))
    }
}
