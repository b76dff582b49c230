//! The association map: concept nodes joined by links that carry a chain
//! node and free-text notes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::LearningSession;

/// Shared by the map and the canvas pie slices.
pub const NODE_PALETTE: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Meaning,
    Keyword,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptNode {
    pub node_id: String,
    pub kind: NodeKind,
    pub label: String,
    pub color_index: u8,
    /// sense_id for the meaning node, keyword_id for keyword nodes.
    pub source_ref: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainNode {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Note {
    pub note_id: String,
    pub text: String,
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssociationLink {
    pub link_id: String,
    /// Canonical order, see [`canonical_pair`].
    pub endpoints: [String; 2],
    pub chain: ChainNode,
    pub notes: Vec<Note>,
}

impl AssociationLink {
    pub fn touches(&self, node_id: &str) -> bool {
        self.endpoints.iter().any(|e| e == node_id)
    }
}

/// Orders two ids so that an unordered pair has one representation. Ids
/// share a prefix and carry zero-padded counters, so shorter-then-lexical
/// order matches creation order.
pub fn canonical_pair(a: &str, b: &str) -> [String; 2] {
    let key = |s: &str| (s.len(), s.to_string());
    if key(a) <= key(b) {
        [a.to_string(), b.to_string()]
    } else {
        [b.to_string(), a.to_string()]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssociationMap {
    pub nodes: Vec<ConceptNode>,
    /// Kept sorted by endpoints.
    pub links: Vec<AssociationLink>,
    /// The learner's final association sentence.
    pub association: String,
    pub archived_nodes: Vec<ConceptNode>,
    pub archived_links: Vec<AssociationLink>,
    nodes_created: u32,
}

impl AssociationMap {
    fn push_node(&mut self, node_id: String, kind: NodeKind, label: String, source_ref: String) {
        let color_index = (self.nodes_created % NODE_PALETTE as u32) as u8;
        self.nodes_created += 1;
        self.nodes.push(ConceptNode {
            node_id,
            kind,
            label,
            color_index,
            source_ref,
        });
    }

    pub(crate) fn add_meaning_node(&mut self, node_id: String, label: String, sense_id: String) {
        self.push_node(node_id, NodeKind::Meaning, label, sense_id);
    }

    pub(crate) fn add_keyword_node(&mut self, node_id: String, label: String, keyword_id: String) {
        self.push_node(node_id, NodeKind::Keyword, label, keyword_id);
    }

    pub fn meaning_node(&self) -> &ConceptNode {
        self.nodes
            .iter()
            .find(|n| n.kind == NodeKind::Meaning)
            .expect("every session has a meaning node")
    }

    pub fn node(&self, node_id: &str) -> Option<&ConceptNode> {
        self.nodes.iter().find(|n| n.node_id == node_id)
    }

    pub fn link(&self, link_id: &str) -> Option<&AssociationLink> {
        self.links.iter().find(|l| l.link_id == link_id)
    }

    fn link_mut(&mut self, link_id: &str) -> Result<&mut AssociationLink> {
        self.links
            .iter_mut()
            .find(|l| l.link_id == link_id)
            .ok_or_else(|| Error::UnknownLink(link_id.to_string()))
    }

    pub fn link_between(&self, a: &str, b: &str) -> Option<&AssociationLink> {
        let pair = canonical_pair(a, b);
        self.links.iter().find(|l| l.endpoints == pair)
    }

    /// "A–B" using node labels in endpoint order.
    pub fn link_label(&self, link: &AssociationLink) -> String {
        let label = |id: &str| self.node(id).map(|n| n.label.clone()).unwrap_or_default();
        format!("{}–{}", label(&link.endpoints[0]), label(&link.endpoints[1]))
    }

    pub(crate) fn insert_link(&mut self, link_id: String, a: &str, b: &str, chain: String) -> AssociationLink {
        let link = AssociationLink {
            link_id,
            endpoints: canonical_pair(a, b),
            chain: ChainNode { text: chain },
            notes: Vec::new(),
        };
        let pos = self
            .links
            .binary_search_by(|l| {
                let key = |p: &[String; 2]| {
                    (p[0].len(), p[0].clone(), p[1].len(), p[1].clone())
                };
                key(&l.endpoints).cmp(&key(&link.endpoints))
            })
            .unwrap_or_else(|p| p);
        self.links.insert(pos, link.clone());
        link
    }

    pub(crate) fn relabel(&mut self, node_id: &str, label: &str) {
        if let Some(node) = self.nodes.iter_mut().find(|n| n.node_id == node_id) {
            node.label = label.to_string();
        }
    }

    /// Moves a node and every link touching it into the archives.
    pub(crate) fn archive_node(&mut self, node_id: &str) {
        if let Some(pos) = self.nodes.iter().position(|n| n.node_id == node_id) {
            let node = self.nodes.remove(pos);
            self.archived_nodes.push(node);
        }
        let (gone, kept): (Vec<_>, Vec<_>) = std::mem::take(&mut self.links)
            .into_iter()
            .partition(|l| l.touches(node_id));
        self.links = kept;
        self.archived_links.extend(gone);
    }

    /// True when the map has no self-loops and no parallel links.
    pub fn is_simple(&self) -> bool {
        let mut pairs = std::collections::HashSet::new();
        self.links
            .iter()
            .all(|l| l.endpoints[0] != l.endpoints[1] && pairs.insert(l.endpoints.clone()))
    }
}

impl LearningSession {
    pub(crate) fn apply_upsert_link(&mut self, a: &str, b: &str) -> Result<AssociationLink> {
        for id in [a, b] {
            if self.map.node(id).is_none() {
                return Err(Error::UnknownNode(id.to_string()));
            }
        }
        if a == b {
            return Err(Error::SelfLink);
        }
        if let Some(existing) = self.map.link_between(a, b) {
            return Ok(existing.clone());
        }
        let link_id = self.next_id("ln");
        Ok(self.map.insert_link(link_id, a, b, String::new()))
    }

    pub(crate) fn apply_delete_link(&mut self, link_id: &str) -> Result<()> {
        let pos = self
            .map
            .links
            .iter()
            .position(|l| l.link_id == link_id)
            .ok_or_else(|| Error::UnknownLink(link_id.to_string()))?;
        let link = self.map.links.remove(pos);
        self.map.archived_links.push(link);
        Ok(())
    }

    pub(crate) fn apply_set_chain(&mut self, link_id: &str, text: &str) -> Result<AssociationLink> {
        let text = text.trim();
        let len = self.rules.measure(text);
        if len > self.rules.chain_text_max {
            return Err(Error::TextTooLong {
                limit: self.rules.chain_text_max,
                actual: len,
            });
        }
        let link = self.map.link_mut(link_id)?;
        link.chain.text = text.to_string();
        Ok(link.clone())
    }

    pub(crate) fn apply_add_note(&mut self, link_id: &str, text: &str, at: u64) -> Result<AssociationLink> {
        self.map.link_mut(link_id)?;
        let text = text.trim();
        if text.is_empty() {
            return Err(Error::EmptyNote);
        }
        let note_id = self.next_id("note");
        let link = self.map.link_mut(link_id)?;
        link.notes.push(Note {
            note_id,
            text: text.to_string(),
            created_at: at,
        });
        Ok(link.clone())
    }
}
