//! Shared fixtures, random operation generators and independent oracles
//! for the integration and acceptance tests.
#![allow(dead_code)]

pub mod pipeline;
pub mod prompts;

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

use wordcraft_core::canvas::{BBox, CanvasElement, CanvasModel, CanvasRelation};
use wordcraft_core::keywords::{KeywordCardDraft, KeywordSource, Origin, MAX_TREE_DEPTH};
use wordcraft_core::map::{canonical_pair, AssociationLink, AssociationMap, ChainNode, ConceptNode, NodeKind};
use wordcraft_core::profile::{IpaInventory, LanguageProfile};
use wordcraft_core::service::BUILTIN_LEXICON;
use wordcraft_core::session::{Command, ImageRecord, Stage};
use wordcraft_core::canvas::{build_image_request, derive_recall_path};
use wordcraft_core::{Error, LearningSession, Lexicon, StyleRegistry, TemplateId, TemplateSet};

pub fn lexicon() -> Lexicon {
    Lexicon::parse(BUILTIN_LEXICON, &IpaInventory::english()).expect("bundled lexicon parses")
}

pub fn session_for(word_id: &str, session_id: &str) -> LearningSession {
    let lex = lexicon();
    let entry = lex.get(word_id).expect("word exists");
    LearningSession::create(session_id, entry, &entry.senses[0].sense_id, &LanguageProfile::zh(), 1_000).unwrap()
}

const CONCEPTS: &[&str] = &["大声", "错综复杂", "出口", "回声", "墙", "晕", "星星", "黑暗"];
const KEYWORDS: &[&str] = &["喇叭", "晕死", "忍", "人声", "流星", "拉布", "林斯", "蜡笔"];
const TEXTS: &[&str] = &["", "dizziness", "echo", "  ", "迷路的人", "a very long chain text that keeps going and going past every limit"];

fn pick<'a, T>(rng: &mut StdRng, items: &'a [T]) -> Option<&'a T> {
    items.choose(rng)
}

/// An existing id most of the time, a bogus one otherwise.
fn id_or_bogus(rng: &mut StdRng, ids: Vec<String>, prefix: &str) -> String {
    if rng.gen_bool(0.9) {
        if let Some(id) = pick(rng, &ids) {
            return id.clone();
        }
    }
    format!("{prefix}-9999")
}

fn random_bbox(rng: &mut StdRng) -> BBox {
    if rng.gen_bool(0.05) {
        return BBox::new(0.8, 0.8, 0.5, 0.5);
    }
    let x = rng.gen_range(0.0..0.8);
    let y = rng.gen_range(0.0..0.8);
    BBox::new(x, y, rng.gen_range(0.05..(1.0 - x)), rng.gen_range(0.05..(1.0 - y)))
}

fn random_tags(rng: &mut StdRng, s: &LearningSession) -> Vec<String> {
    let ids: Vec<String> = s.map.nodes.iter().map(|n| n.node_id.clone()).collect();
    let n = rng.gen_range(0..=ids.len().min(3));
    let mut tags: Vec<String> = ids.choose_multiple(rng, n).cloned().collect();
    if rng.gen_bool(0.05) {
        tags.push("cn-9999".into());
    }
    tags
}

fn random_drafts(rng: &mut StdRng) -> Vec<KeywordCardDraft> {
    let n = if rng.gen_bool(0.9) { 4 } else { rng.gen_range(0..6) };
    KEYWORDS
        .choose_multiple(rng, n)
        .map(|k| KeywordCardDraft {
            keyword: k.to_string(),
            explanation: "sounds alike".into(),
            reasoning: "fits the segment".into(),
        })
        .collect()
}

fn random_source(rng: &mut StdRng, s: &LearningSession) -> KeywordSource {
    let cards: Vec<String> = s.batches.iter().flat_map(|b| b.cards.iter().map(|c| c.card_id.clone())).collect();
    if !cards.is_empty() && rng.gen_bool(0.5) {
        KeywordSource::Card {
            card_id: id_or_bogus(rng, cards, "kc"),
        }
    } else {
        KeywordSource::User {
            keyword: pick(rng, KEYWORDS).unwrap().to_string(),
            explanation: String::new(),
        }
    }
}

/// A random command against `s`, valid or not.
pub fn random_command(rng: &mut StdRng, s: &LearningSession) -> Command {
    let len = s.word.phonemes.len();
    let seg_ids: Vec<String> = s.segments.iter().map(|x| x.segment_id.clone()).collect();
    let node_ids: Vec<String> = s.map.nodes.iter().map(|n| n.node_id.clone()).collect();
    let link_ids: Vec<String> = s.map.links.iter().map(|l| l.link_id.clone()).collect();
    let el_ids: Vec<String> = s.canvas.elements.iter().map(|e| e.element_id.clone()).collect();
    let rel_ids: Vec<String> = s.canvas.relations.iter().map(|r| r.relation_id.clone()).collect();
    let tree_ids: Vec<String> = s.tree.nodes.iter().map(|n| n.node_id.clone()).collect();
    match rng.gen_range(0..100) {
        0..=11 => {
            let start = rng.gen_range(0..=len);
            let end = rng.gen_range(0..=len + 1);
            Command::BrushSegment { start, end }
        }
        12 => Command::ClearSegments {},
        13..=22 => {
            let anchors: Vec<String> = s.tree.anchors.iter().map(|a| a.anchor_id.clone()).collect();
            let anchor_id = id_or_bogus(rng, anchors, "cn");
            let parents: Vec<String> = s
                .tree
                .nodes
                .iter()
                .filter(|n| n.anchor_id == anchor_id)
                .map(|n| n.node_id.clone())
                .collect();
            let parent_id = if rng.gen_bool(0.5) { pick(rng, &parents).cloned() } else { None };
            Command::AddSemanticNode {
                anchor_id,
                parent_id,
                concept: pick(rng, CONCEPTS).unwrap().to_string(),
                cue: String::new(),
                translation: String::new(),
                origin: if rng.gen_bool(0.5) { Origin::User } else { Origin::Suggested },
            }
        }
        23..=30 => Command::SuggestKeywords {
            segment_id: id_or_bogus(rng, seg_ids, "seg"),
            selected_node_ids: tree_ids.choose_multiple(rng, 2).cloned().collect(),
            cards: random_drafts(rng),
        },
        31..=42 => Command::SelectKeyword {
            segment_id: id_or_bogus(rng, seg_ids, "seg"),
            source: random_source(rng, s),
            chain_node_ids: if rng.gen_bool(0.3) {
                tree_ids.choose_multiple(rng, 1).cloned().collect()
            } else {
                Vec::new()
            },
            previous: None,
        },
        43..=45 => Command::PropagateKeywordChange {
            keyword_id: id_or_bogus(rng, s.choices.iter().map(|c| c.keyword_id.clone()).collect(), "kw"),
            source: random_source(rng, s),
            previous: None,
        },
        46..=53 => Command::UpsertLink {
            node_a: id_or_bogus(rng, node_ids.clone(), "cn"),
            node_b: id_or_bogus(rng, node_ids, "cn"),
        },
        54..=55 => Command::DeleteLink {
            link_id: id_or_bogus(rng, link_ids, "ln"),
        },
        56..=58 => Command::SetChain {
            link_id: id_or_bogus(rng, link_ids, "ln"),
            text: pick(rng, TEXTS).unwrap().to_string(),
        },
        59..=60 => Command::AddNote {
            link_id: id_or_bogus(rng, link_ids, "ln"),
            text: pick(rng, TEXTS).unwrap().to_string(),
        },
        61 => Command::SetAssociation {
            text: pick(rng, TEXTS).unwrap().to_string(),
        },
        62..=73 => Command::AddElement {
            bbox: random_bbox(rng),
            tags: random_tags(rng, s),
            description: pick(rng, TEXTS).unwrap().to_string(),
        },
        74..=77 => Command::UpdateElement {
            element_id: id_or_bogus(rng, el_ids, "el"),
            bbox: rng.gen_bool(0.3).then(|| random_bbox(rng)),
            tags: rng.gen_bool(0.6).then(|| random_tags(rng, s)),
            description: rng.gen_bool(0.3).then(|| pick(rng, TEXTS).unwrap().to_string()),
        },
        78..=80 => Command::DeleteElement {
            element_id: id_or_bogus(rng, el_ids, "el"),
        },
        81..=88 => Command::AddRelation {
            element_a: id_or_bogus(rng, el_ids.clone(), "el"),
            element_b: id_or_bogus(rng, el_ids, "el"),
            text: pick(rng, TEXTS).unwrap().to_string(),
        },
        89..=90 => Command::DeleteRelation {
            relation_id: id_or_bogus(rng, rel_ids, "rel"),
        },
        91..=93 => Command::GotoStage {
            stage: *pick(rng, &[Stage::Overview, Stage::KeywordSelection, Stage::Association, Stage::Imagery]).unwrap(),
        },
        94..=96 => Command::TickActive {
            delta_ms: rng.gen_range(0..5_000),
        },
        97..=98 => Command::AttachImage {
            job_id: format!("job-{:04}", rng.gen_range(1..50)),
            image_ref: "sessions/s/images/x.png".into(),
            style: "sketch".into(),
            width: Some(1),
            height: Some(1),
        },
        _ => Command::RecordWordCard {
            card_id: "card-x".into(),
            allow_no_image: rng.gen_bool(0.5),
        },
    }
}

/// Applies a random command and checks the all-or-nothing contract.
pub fn step(rng: &mut StdRng, s: &mut LearningSession, at: u64) -> Result<bool, String> {
    let cmd = random_command(rng, s);
    let before = s.clone();
    match s.execute(cmd.clone(), at) {
        Ok(_) => {
            if s.events.len() != before.events.len() + 1 {
                return Err(format!("{cmd:?} appended {} events", s.events.len() - before.events.len()));
            }
            Ok(true)
        }
        Err(_) => {
            if *s != before {
                return Err(format!("failed {cmd:?} changed the session"));
            }
            Ok(false)
        }
    }
}

/// Builds a random session with `ops` attempted operations; recording is
/// skipped so the session stays editable.
pub fn random_session(rng: &mut StdRng, word_id: &str, ops: usize) -> LearningSession {
    let mut s = session_for(word_id, "s-fuzz");
    for i in 0..ops {
        let cmd = random_command(rng, &s);
        if matches!(cmd, Command::RecordWordCard { .. }) {
            continue;
        }
        let _ = s.execute(cmd, 2_000 + i as u64);
    }
    s
}

pub fn random_word(rng: &mut StdRng) -> String {
    let lex = lexicon();
    let ids: Vec<String> = lex.iter().map(|e| e.word_id.clone()).collect();
    ids.choose(rng).unwrap().clone()
}

/// Structural invariants of a session, each checked from raw fields.
pub fn check_invariants(s: &LearningSession) -> Result<(), String> {
    let len = s.word.phonemes.len();
    for (i, a) in s.segments.iter().enumerate() {
        if a.start >= a.end || a.end > len {
            return Err(format!("segment {} out of range", a.segment_id));
        }
        for b in &s.segments[i + 1..] {
            if a.start < b.end && b.start < a.end {
                return Err(format!("segments {} and {} overlap", a.segment_id, b.segment_id));
            }
        }
    }
    let colors: HashSet<_> = s.segments.iter().map(|x| x.color_index).collect();
    if colors.len() != s.segments.len() {
        return Err("segment colors repeat".into());
    }

    for n in &s.tree.nodes {
        if n.depth == 0 || n.depth > MAX_TREE_DEPTH {
            return Err(format!("tree node {} at depth {}", n.node_id, n.depth));
        }
        if s.tree.anchor(&n.anchor_id).is_none() {
            return Err(format!("tree node {} has no anchor", n.node_id));
        }
        match &n.parent_id {
            None if n.depth != 1 => return Err(format!("root node {} at depth {}", n.node_id, n.depth)),
            Some(p) => {
                let parent = s.tree.node(p).ok_or_else(|| format!("missing parent {p}"))?;
                if parent.depth + 1 != n.depth || parent.anchor_id != n.anchor_id {
                    return Err(format!("tree node {} disagrees with its parent", n.node_id));
                }
            }
            _ => {}
        }
    }

    let node_ids: HashSet<&str> = s.map.nodes.iter().map(|n| n.node_id.as_str()).collect();
    if node_ids.len() != s.map.nodes.len() {
        return Err("duplicate node ids".into());
    }
    if s.map.nodes.iter().filter(|n| n.kind == NodeKind::Meaning).count() != 1 {
        return Err("map needs exactly one meaning node".into());
    }
    let mut pairs = HashSet::new();
    for l in &s.map.links {
        let [a, b] = &l.endpoints;
        if a == b {
            return Err(format!("self link {}", l.link_id));
        }
        if !node_ids.contains(a.as_str()) || !node_ids.contains(b.as_str()) {
            return Err(format!("dangling link {}", l.link_id));
        }
        let key: BTreeSet<&str> = [a.as_str(), b.as_str()].into();
        if !pairs.insert(key) {
            return Err(format!("parallel link {}", l.link_id));
        }
        if s.rules.measure(&l.chain.text) > s.rules.chain_text_max {
            return Err(format!("chain on {} too long", l.link_id));
        }
    }

    let active_segments: HashSet<&str> = s.segments.iter().map(|x| x.segment_id.as_str()).collect();
    let mut per_segment = HashSet::new();
    let mut choice_nodes = HashMap::new();
    for c in &s.choices {
        if !active_segments.contains(c.segment_id.as_str()) {
            return Err(format!("choice {} on inactive segment", c.keyword_id));
        }
        if !per_segment.insert(c.segment_id.as_str()) {
            return Err(format!("segment {} has two choices", c.segment_id));
        }
        let node = s.map.node(&c.node_id).ok_or_else(|| format!("choice {} has no node", c.keyword_id))?;
        if node.kind != NodeKind::Keyword || node.source_ref != c.keyword_id || node.label != c.keyword {
            return Err(format!("node {} does not mirror choice {}", node.node_id, c.keyword_id));
        }
        choice_nodes.insert(c.node_id.as_str(), c.keyword_id.as_str());
    }
    for n in s.map.nodes.iter().filter(|n| n.kind == NodeKind::Keyword) {
        if !choice_nodes.contains_key(n.node_id.as_str()) {
            return Err(format!("keyword node {} has no choice", n.node_id));
        }
    }

    let el_ids: HashSet<&str> = s.canvas.elements.iter().map(|e| e.element_id.as_str()).collect();
    for e in &s.canvas.elements {
        if e.tags.is_empty() {
            return Err(format!("element {} has no tags", e.element_id));
        }
        if let Some(t) = e.tags.iter().find(|t| !node_ids.contains(t.as_str())) {
            return Err(format!("element {} tags unknown node {t}", e.element_id));
        }
    }
    for r in &s.canvas.relations {
        if !r.endpoints.iter().all(|e| el_ids.contains(e.as_str())) {
            return Err(format!("dangling relation {}", r.relation_id));
        }
    }

    let replayed = LearningSession::replay(&s.events).map_err(|e| format!("replay failed: {e}"))?;
    if &replayed != s {
        return Err("replay differs from live state".into());
    }
    Ok(())
}

/// A canvas configuration over node indices: element tag bitmasks and
/// relations as element index pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Layout {
    pub tags: Vec<u8>,
    pub relations: Vec<(usize, usize)>,
}

/// Independent truth table for node and link activation.
pub fn coverage_truth(layout: &Layout, nodes: usize, links: &[(usize, usize)]) -> (Vec<bool>, Vec<bool>) {
    let union = layout.tags.iter().fold(0u8, |acc, t| acc | t);
    let node_on = (0..nodes).map(|j| union & (1 << j) != 0).collect();
    let link_on = links
        .iter()
        .map(|&(a, b)| {
            let pair = (1u8 << a) | (1u8 << b);
            let together = layout.tags.iter().any(|t| t & pair == pair);
            let across = layout.relations.iter().any(|&(i, k)| {
                let (x, y) = (layout.tags[i], layout.tags[k]);
                (x & (1 << a) != 0 && y & (1 << b) != 0) || (x & (1 << b) != 0 && y & (1 << a) != 0)
            });
            together || across
        })
        .collect();
    (node_on, link_on)
}

pub fn node_id(i: usize) -> String {
    format!("cn-{:04}", i + 1)
}

pub fn build_map(nodes: usize, links: &[(usize, usize)]) -> AssociationMap {
    let mut map = AssociationMap::default();
    for i in 0..nodes {
        map.nodes.push(ConceptNode {
            node_id: node_id(i),
            kind: if i == 0 { NodeKind::Meaning } else { NodeKind::Keyword },
            label: format!("n{i}"),
            color_index: i as u8,
            source_ref: String::new(),
        });
    }
    for (k, &(a, b)) in links.iter().enumerate() {
        map.links.push(AssociationLink {
            link_id: format!("ln-{:04}", k + 1),
            endpoints: canonical_pair(&node_id(a), &node_id(b)),
            chain: ChainNode::default(),
            notes: Vec::new(),
        });
    }
    map
}

pub fn build_canvas(layout: &Layout, nodes: usize) -> CanvasModel {
    let elements = layout
        .tags
        .iter()
        .enumerate()
        .map(|(i, &mask)| CanvasElement {
            element_id: format!("el-{:04}", i + 1),
            bbox: BBox::new(0.0, 0.0, 0.5, 0.5),
            tags: (0..nodes).filter(|j| mask & (1 << j) != 0).map(node_id).collect(),
            description: String::new(),
        })
        .collect();
    let relations = layout
        .relations
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| CanvasRelation {
            relation_id: format!("rel-{:04}", k + 1),
            endpoints: [format!("el-{:04}", a + 1), format!("el-{:04}", b + 1)],
            text: String::new(),
        })
        .collect();
    CanvasModel { elements, relations }
}

/// Every unordered pair of `0..n`.
pub fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect()
}

pub fn image_record(job: u32) -> ImageRecord {
    ImageRecord {
        job_id: format!("job-{job:04}"),
        image_ref: format!("sessions/s/images/job-{job:04}.png"),
        style: "sketch".into(),
        width: Some(1),
        height: Some(1),
    }
}

/// Every layout with `elements` elements over `nodes` nodes: each element
/// gets a non-empty tag set and any subset of element pairs is related.
pub fn layouts(nodes: usize, elements: usize) -> Vec<Layout> {
    let masks: Vec<u8> = (1..(1u8 << nodes)).collect();
    let mut tag_sets: Vec<Vec<u8>> = vec![vec![]];
    for _ in 0..elements {
        tag_sets = tag_sets
            .into_iter()
            .flat_map(|prefix| {
                masks.iter().map(move |&m| {
                    let mut v = prefix.clone();
                    v.push(m);
                    v
                })
            })
            .collect();
    }
    let pairs = all_pairs(elements);
    let mut out = Vec::new();
    for tags in tag_sets {
        for rel_mask in 0..(1u32 << pairs.len()) {
            let relations = pairs
                .iter()
                .enumerate()
                .filter(|(k, _)| rel_mask & (1 << k) != 0)
                .map(|(_, &p)| p)
                .collect();
            out.push(Layout {
                tags: tags.clone(),
                relations,
            });
        }
    }
    out
}

/// Checks that image requests fail exactly when some node or link is
/// inactive, naming exactly those; returns whether the path is complete.
pub fn gating_matches_coverage(s: &LearningSession) -> Result<bool, String> {
    let set = TemplateSet::builtin("zh").map_err(|e| e.to_string())?;
    let template = set.get(TemplateId::ImageCompose).map_err(|e| e.to_string())?;
    let styles = StyleRegistry::default();

    let tagged: BTreeSet<&str> = s.canvas.elements.iter().flat_map(|e| e.tags.iter().map(String::as_str)).collect();
    let inactive_nodes: BTreeSet<String> = s
        .map
        .nodes
        .iter()
        .filter(|n| !tagged.contains(n.node_id.as_str()))
        .map(|n| n.node_id.clone())
        .collect();
    let carries = |el: &CanvasElement, id: &str| el.tags.iter().any(|t| t == id);
    let inactive_links: BTreeSet<String> = s
        .map
        .links
        .iter()
        .filter(|l| {
            let [a, b] = &l.endpoints;
            let together = s.canvas.elements.iter().any(|e| carries(e, a) && carries(e, b));
            let across = s.canvas.relations.iter().any(|r| {
                match (s.canvas.element(&r.endpoints[0]), s.canvas.element(&r.endpoints[1])) {
                    (Some(x), Some(y)) => (carries(x, a) && carries(y, b)) || (carries(x, b) && carries(y, a)),
                    _ => false,
                }
            });
            !(together || across)
        })
        .map(|l| l.link_id.clone())
        .collect();

    let complete = derive_recall_path(s).is_complete;
    if complete != (inactive_nodes.is_empty() && inactive_links.is_empty()) {
        return Err(format!("is_complete = {complete} disagrees with the oracle"));
    }
    match build_image_request(s, "sketch", &styles, template) {
        Ok(_) if complete => Ok(true),
        Ok(_) => Err("an incomplete path produced an image request".into()),
        Err(Error::RecallPathIncomplete { missing_nodes, missing_links }) => {
            if complete {
                return Err("a complete path was refused".into());
            }
            let got_nodes: BTreeSet<String> = missing_nodes.into_iter().map(|m| m.id).collect();
            let got_links: BTreeSet<String> = missing_links.into_iter().map(|m| m.id).collect();
            if got_nodes != inactive_nodes || got_links != inactive_links {
                return Err(format!(
                    "missing {got_nodes:?} {got_links:?}, oracle says {inactive_nodes:?} {inactive_links:?}"
                ));
            }
            Ok(false)
        }
        Err(e) => Err(format!("unexpected error {e}")),
    }
}
