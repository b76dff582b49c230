//! The mental-imagery canvas, recall-path coverage and the layout-guided
//! image request.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, MissingItem, Result};
use crate::gateway::template::PromptTemplate;
use crate::map::{canonical_pair, AssociationMap};
use crate::session::LearningSession;

/// Marks the start of the fixed constraint block in the image template.
pub const CONSTRAINT_HEADING: &str = "-- Mandatory Constraints --";

/// Rectangle in normalized canvas units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn validate(&self) -> Result<()> {
        let Self { x, y, w, h } = *self;
        if ![x, y, w, h].iter().all(|v| v.is_finite()) {
            return Err(Error::BadBBox("coordinates must be finite".into()));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::BadBBox(format!("width and height must be positive, got {w}x{h}")));
        }
        if x < 0.0 || y < 0.0 || x + w > 1.0 + 1e-9 || y + h > 1.0 + 1e-9 {
            return Err(Error::BadBBox(format!(
                "({x}, {y}, {w}, {h}) leaves the unit canvas"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanvasElement {
    pub element_id: String,
    pub bbox: BBox,
    /// Concept node ids, in the order given by the learner.
    pub tags: Vec<String>,
    pub description: String,
}

impl CanvasElement {
    pub fn has_tag(&self, node_id: &str) -> bool {
        self.tags.iter().any(|t| t == node_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanvasRelation {
    pub relation_id: String,
    pub endpoints: [String; 2],
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CanvasModel {
    pub elements: Vec<CanvasElement>,
    pub relations: Vec<CanvasRelation>,
}

impl CanvasModel {
    pub fn element(&self, element_id: &str) -> Option<&CanvasElement> {
        self.elements.iter().find(|e| e.element_id == element_id)
    }

    pub fn relation(&self, relation_id: &str) -> Option<&CanvasRelation> {
        self.relations.iter().find(|r| r.relation_id == relation_id)
    }

    pub(crate) fn delete_element(&mut self, element_id: &str) -> Result<()> {
        let pos = self
            .elements
            .iter()
            .position(|e| e.element_id == element_id)
            .ok_or_else(|| Error::UnknownElement(element_id.to_string()))?;
        self.elements.remove(pos);
        self.relations.retain(|r| !r.endpoints.iter().any(|e| e == element_id));
        Ok(())
    }

    pub(crate) fn delete_relation(&mut self, relation_id: &str) -> Result<()> {
        let pos = self
            .relations
            .iter()
            .position(|r| r.relation_id == relation_id)
            .ok_or_else(|| Error::UnknownRelation(relation_id.to_string()))?;
        self.relations.remove(pos);
        Ok(())
    }

    /// Drops a concept tag everywhere. Elements left without tags are
    /// removed together with their relations.
    pub(crate) fn strip_tag(&mut self, node_id: &str) {
        for e in &mut self.elements {
            e.tags.retain(|t| t != node_id);
        }
        let empty: Vec<String> = self
            .elements
            .iter()
            .filter(|e| e.tags.is_empty())
            .map(|e| e.element_id.clone())
            .collect();
        for id in empty {
            let _ = self.delete_element(&id);
        }
    }
}

fn check_tags(map: &AssociationMap, tags: &[String]) -> Result<Vec<String>> {
    if tags.is_empty() {
        return Err(Error::InvalidArgument("an element needs at least one concept tag".into()));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(tags.len());
    for t in tags {
        if map.node(t).is_none() {
            return Err(Error::UnknownConceptTag(t.clone()));
        }
        if seen.insert(t.as_str()) {
            out.push(t.clone());
        }
    }
    Ok(out)
}

impl LearningSession {
    pub(crate) fn apply_add_element(
        &mut self,
        bbox: BBox,
        tags: &[String],
        description: &str,
    ) -> Result<CanvasElement> {
        bbox.validate()?;
        let tags = check_tags(&self.map, tags)?;
        let element = CanvasElement {
            element_id: self.next_id("el"),
            bbox,
            tags,
            description: description.trim().to_string(),
        };
        self.canvas.elements.push(element.clone());
        Ok(element)
    }

    pub(crate) fn apply_update_element(
        &mut self,
        element_id: &str,
        bbox: Option<BBox>,
        tags: Option<&[String]>,
        description: Option<&str>,
    ) -> Result<CanvasElement> {
        if self.canvas.element(element_id).is_none() {
            return Err(Error::UnknownElement(element_id.to_string()));
        }
        if let Some(b) = bbox {
            b.validate()?;
        }
        let tags = tags.map(|t| check_tags(&self.map, t)).transpose()?;
        let element = self
            .canvas
            .elements
            .iter_mut()
            .find(|e| e.element_id == element_id)
            .expect("checked above");
        if let Some(b) = bbox {
            element.bbox = b;
        }
        if let Some(t) = tags {
            element.tags = t;
        }
        if let Some(d) = description {
            element.description = d.trim().to_string();
        }
        Ok(element.clone())
    }

    pub(crate) fn apply_add_relation(&mut self, a: &str, b: &str, text: &str) -> Result<CanvasRelation> {
        for id in [a, b] {
            if self.canvas.element(id).is_none() {
                return Err(Error::UnknownElement(id.to_string()));
            }
        }
        if a == b {
            return Err(Error::InvalidArgument("a relation needs two distinct elements".into()));
        }
        let relation = CanvasRelation {
            relation_id: self.next_id("rel"),
            endpoints: canonical_pair(a, b),
            text: text.trim().to_string(),
        };
        self.canvas.relations.push(relation.clone());
        Ok(relation)
    }
}

/// Activation of every map node and link, in map order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub nodes: Vec<(String, bool)>,
    pub links: Vec<(String, bool)>,
    pub is_complete: bool,
}

/// A node is active when some element carries its tag. A link is active
/// when one element carries both endpoint tags, or a relation joins an
/// element tagged with one endpoint to an element tagged with the other.
pub fn compute_coverage(map: &AssociationMap, canvas: &CanvasModel) -> Coverage {
    let tagged: HashSet<&str> = canvas
        .elements
        .iter()
        .flat_map(|e| e.tags.iter().map(String::as_str))
        .collect();
    let by_id: BTreeMap<&str, &CanvasElement> = canvas
        .elements
        .iter()
        .map(|e| (e.element_id.as_str(), e))
        .collect();
    let nodes: Vec<(String, bool)> = map
        .nodes
        .iter()
        .map(|n| (n.node_id.clone(), tagged.contains(n.node_id.as_str())))
        .collect();
    let links: Vec<(String, bool)> = map
        .links
        .iter()
        .map(|l| {
            let [a, b] = &l.endpoints;
            let colocated = canvas.elements.iter().any(|e| e.has_tag(a) && e.has_tag(b));
            let related = || {
                canvas.relations.iter().any(|r| {
                    let (Some(x), Some(y)) = (by_id.get(r.endpoints[0].as_str()), by_id.get(r.endpoints[1].as_str()))
                    else {
                        return false;
                    };
                    (x.has_tag(a) && y.has_tag(b)) || (x.has_tag(b) && y.has_tag(a))
                })
            };
            (l.link_id.clone(), colocated || related())
        })
        .collect();
    let is_complete = nodes.iter().all(|(_, on)| *on) && links.iter().all(|(_, on)| *on);
    Coverage {
        nodes,
        links,
        is_complete,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecallNode {
    pub node_id: String,
    pub label: String,
    pub color_index: u8,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecallLink {
    pub link_id: String,
    pub endpoints: [String; 2],
    pub label: String,
    pub active: bool,
}

/// The map reduced to nodes and links, with activation flags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecallPath {
    pub nodes: Vec<RecallNode>,
    pub links: Vec<RecallLink>,
    pub is_complete: bool,
    pub missing_nodes: Vec<MissingItem>,
    pub missing_links: Vec<MissingItem>,
}

pub fn derive_recall_path(session: &LearningSession) -> RecallPath {
    let map = &session.map;
    let coverage = compute_coverage(map, &session.canvas);
    let nodes: Vec<RecallNode> = map
        .nodes
        .iter()
        .zip(&coverage.nodes)
        .map(|(n, (_, active))| RecallNode {
            node_id: n.node_id.clone(),
            label: n.label.clone(),
            color_index: n.color_index,
            active: *active,
        })
        .collect();
    let links: Vec<RecallLink> = map
        .links
        .iter()
        .zip(&coverage.links)
        .map(|(l, (_, active))| RecallLink {
            link_id: l.link_id.clone(),
            endpoints: l.endpoints.clone(),
            label: map.link_label(l),
            active: *active,
        })
        .collect();
    let missing_nodes = nodes
        .iter()
        .filter(|n| !n.active)
        .map(|n| MissingItem {
            id: n.node_id.clone(),
            label: n.label.clone(),
        })
        .collect();
    let missing_links = links
        .iter()
        .filter(|l| !l.active)
        .map(|l| MissingItem {
            id: l.link_id.clone(),
            label: l.label.clone(),
        })
        .collect();
    RecallPath {
        nodes,
        links,
        is_complete: coverage.is_complete,
        missing_nodes,
        missing_links,
    }
}

/// One equal pie slice per tag, colored by the tagged node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieSlice {
    pub node_id: String,
    pub color_index: u8,
    pub fraction: f64,
}

pub fn pie_slices(map: &AssociationMap, element: &CanvasElement) -> Vec<PieSlice> {
    let n = element.tags.len().max(1) as f64;
    element
        .tags
        .iter()
        .filter_map(|t| map.node(t))
        .map(|node| PieSlice {
            node_id: node.node_id.clone(),
            color_index: node.color_index,
            fraction: 1.0 / n,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StylePreset {
    pub id: String,
    /// Phrase handed to the image model.
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleRegistry {
    presets: BTreeMap<String, StylePreset>,
}

impl Default for StyleRegistry {
    fn default() -> Self {
        let mut r = Self {
            presets: BTreeMap::new(),
        };
        for (id, prompt) in [
            ("pixar_animation", "Pixar-style 3D animation"),
            ("watercolor", "soft watercolor painting"),
            ("flat_illustration", "flat vector illustration"),
            ("sketch", "pencil sketch"),
        ] {
            r.insert(id, prompt);
        }
        r
    }
}

impl StyleRegistry {
    pub fn insert(&mut self, id: &str, prompt: &str) {
        self.presets.insert(
            id.to_string(),
            StylePreset {
                id: id.to_string(),
                prompt: prompt.to_string(),
            },
        );
    }

    pub fn get(&self, id: &str) -> Result<&StylePreset> {
        self.presets
            .get(id)
            .ok_or_else(|| Error::UnknownStyle(id.to_string()))
    }

    pub fn ids(&self) -> Vec<String> {
        self.presets.keys().cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutRegion {
    pub element_id: String,
    pub bbox: BBox,
    pub labels: Vec<String>,
    pub region_description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionRelation {
    pub regions: [String; 2],
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRequest {
    pub layout: Vec<LayoutRegion>,
    pub relations: Vec<RegionRelation>,
    pub style: String,
    /// Textual stand-in for the wireframe sketch: boxes and labels.
    pub wireframe_spec: String,
    pub negative_constraints: Vec<String>,
    pub prompt: String,
}

fn region_name(index: usize) -> String {
    format!("Box {}", index + 1)
}

fn wireframe_spec(layout: &[LayoutRegion]) -> String {
    layout
        .iter()
        .enumerate()
        .map(|(i, r)| {
            format!(
                "{}: x={:.3} y={:.3} w={:.3} h={:.3} labels=[{}]",
                region_name(i),
                r.bbox.x,
                r.bbox.y,
                r.bbox.w,
                r.bbox.h,
                r.labels.join(", ")
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Lines of the fixed constraint block following [`CONSTRAINT_HEADING`].
pub fn constraint_lines(text: &str) -> Vec<String> {
    let Some(pos) = text.find(CONSTRAINT_HEADING) else {
        return Vec::new();
    };
    text[pos + CONSTRAINT_HEADING.len()..]
        .lines()
        .map(str::trim)
        .take_while(|l| !l.starts_with("-- "))
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

/// Assembles the image request for a fully activated canvas.
pub fn build_image_request(
    session: &LearningSession,
    style: &str,
    styles: &StyleRegistry,
    template: &PromptTemplate,
) -> Result<ImageRequest> {
    let path = derive_recall_path(session);
    if !path.is_complete {
        return Err(Error::RecallPathIncomplete {
            missing_nodes: path.missing_nodes,
            missing_links: path.missing_links,
        });
    }
    let preset = styles.get(style)?;
    let map = &session.map;
    let layout: Vec<LayoutRegion> = session
        .canvas
        .elements
        .iter()
        .map(|e| LayoutRegion {
            element_id: e.element_id.clone(),
            bbox: e.bbox,
            labels: e
                .tags
                .iter()
                .filter_map(|t| map.node(t).map(|n| n.label.clone()))
                .collect(),
            region_description: e.description.clone(),
        })
        .collect();
    if layout.is_empty() {
        return Err(Error::InvalidArgument("the canvas has no elements".into()));
    }
    let index: BTreeMap<&str, usize> = layout
        .iter()
        .enumerate()
        .map(|(i, r)| (r.element_id.as_str(), i))
        .collect();
    let relations: Vec<RegionRelation> = session
        .canvas
        .relations
        .iter()
        .map(|r| RegionRelation {
            regions: r.endpoints.clone(),
            text: r.text.clone(),
        })
        .collect();
    let wireframe = wireframe_spec(&layout);
    let region_descriptions = layout
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let text = if r.region_description.is_empty() {
                r.labels.join(", ")
            } else {
                r.region_description.clone()
            };
            format!("{}: {}", region_name(i), text)
        })
        .collect::<Vec<_>>()
        .join("\n");
    let relation_text = relations
        .iter()
        .map(|r| {
            let a = region_name(index[r.regions[0].as_str()]);
            let b = region_name(index[r.regions[1].as_str()]);
            if r.text.is_empty() {
                format!("{a} <-> {b}")
            } else {
                format!("{a} <-> {b}: {}", r.text)
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let vars: BTreeMap<String, serde_json::Value> = [
        ("wireframe_spec", json!(wireframe)),
        ("region_descriptions", json!(region_descriptions)),
        ("relations", json!(relation_text)),
        ("style", json!(preset.prompt)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let prompt = template.render(&vars)?;
    Ok(ImageRequest {
        negative_constraints: constraint_lines(&prompt),
        layout,
        relations,
        style: preset.id.clone(),
        wireframe_spec: wireframe,
        prompt,
    })
}

/// Ids of all nodes referenced by any element tag.
pub fn tagged_nodes(canvas: &CanvasModel) -> BTreeSet<String> {
    canvas.elements.iter().flat_map(|e| e.tags.iter().cloned()).collect()
}
