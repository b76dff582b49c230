//! Provider-backed suggestions. None of these mutate the session; callers
//! decide what to keep.

use std::collections::HashSet;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gateway::template::{vars, TemplateId};
use crate::gateway::validate::{Candidate, ConceptSuggestion, Payload};
use crate::gateway::Gateway;
use crate::keywords::KeywordCardDraft;
use crate::session::LearningSession;

fn unexpected(id: TemplateId) -> Error {
    Error::Format {
        template: id.to_string(),
        reason: "payload of the wrong kind".into(),
    }
}

fn sentences(payload: Payload, id: TemplateId) -> Result<Vec<String>> {
    match payload {
        Payload::Sentences(s) => Ok(s),
        _ => Err(unexpected(id)),
    }
}

/// Up to `count` new concepts for an anchor; concepts already under the
/// anchor are dropped.
pub fn suggest_semantic_nodes(
    session: &LearningSession,
    gateway: &Gateway,
    anchor_id: &str,
    count: usize,
) -> Result<Vec<ConceptSuggestion>> {
    let anchor = session
        .tree
        .anchor(anchor_id)
        .ok_or_else(|| Error::UnknownAnchor(anchor_id.to_string()))?;
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let existing = session.tree.concepts_under(anchor_id);
    let meaning = if anchor.concept == session.word.surface {
        session.sense.gloss_l1.clone()
    } else {
        session
            .choice_for_anchor(anchor_id)
            .map(|c| c.explanation.clone())
            .unwrap_or_default()
    };
    let v = vars([
        ("target", json!(anchor.concept)),
        ("meaning", json!(meaning)),
        ("existing", json!(existing)),
        ("count", json!(count)),
    ]);
    let Payload::Concepts(concepts) = gateway.call_text(TemplateId::SemanticAssoc, &v, &[])? else {
        return Err(unexpected(TemplateId::SemanticAssoc));
    };
    let taken: HashSet<&str> = existing.into_iter().collect();
    Ok(concepts
        .into_iter()
        .filter(|c| !taken.contains(c.concept.as_str()))
        .take(count)
        .collect())
}

/// Concepts of the selected semantic nodes, in the given order.
fn related_concepts(session: &LearningSession, node_ids: &[String]) -> Result<Vec<String>> {
    node_ids
        .iter()
        .map(|id| {
            session
                .tree
                .node(id)
                .map(|n| n.concept.clone())
                .ok_or_else(|| Error::UnknownSemanticNode(id.clone()))
        })
        .collect()
}

/// Runs both keyword stages and returns four unseen cards. The caller
/// records them with `record_keyword_batch`.
pub fn suggest_keywords(
    session: &LearningSession,
    gateway: &Gateway,
    segment_id: &str,
    selected_node_ids: &[String],
) -> Result<Vec<KeywordCardDraft>> {
    let segment = session
        .active_segment(segment_id)
        .ok_or_else(|| Error::UnknownSegment(segment_id.to_string()))?;
    let ipa = segment.ipa(&session.word.phonemes);
    let related = related_concepts(session, selected_node_ids)?;
    let stage_one = vars([("ipa", json!(ipa)), ("related", json!(related))]);
    let Payload::Candidates(candidates) = gateway.call_text(TemplateId::KeywordGen, &stage_one, &[])? else {
        return Err(unexpected(TemplateId::KeywordGen));
    };
    let exclude = session.shown_keywords();
    let fresh: Vec<&Candidate> = candidates.iter().filter(|c| !exclude.contains(&c.keyword)).collect();
    let stage_two = vars([
        ("ipa", json!(ipa)),
        ("related", json!(related)),
        ("candidates", json!(fresh)),
        ("exclude", json!(exclude)),
    ]);
    match gateway.call_text(TemplateId::KeywordReview, &stage_two, &exclude)? {
        Payload::Reviewed(cards) => Ok(cards),
        _ => Err(unexpected(TemplateId::KeywordReview)),
    }
}

/// Indirect hints for a link, grounded in its chain, notes and the current
/// association sentence.
pub fn suggest_hints(session: &LearningSession, gateway: &Gateway, link_id: &str) -> Result<Vec<String>> {
    let link = session
        .map
        .link(link_id)
        .ok_or_else(|| Error::UnknownLink(link_id.to_string()))?;
    let label = |id: &str| session.map.node(id).map(|n| n.label.clone()).unwrap_or_default();
    let notes: Vec<&str> = link.notes.iter().map(|n| n.text.as_str()).collect();
    let v = vars([
        ("entity_a", json!(label(&link.endpoints[0]))),
        ("entity_b", json!(label(&link.endpoints[1]))),
        ("chain", json!(link.chain.text)),
        ("notes", json!(notes)),
        ("association", json!(session.map.association)),
    ]);
    sentences(gateway.call_text(TemplateId::AssocHints, &v, &[])?, TemplateId::AssocHints)
}

fn echoes(phrase: &str, descriptions: &[&str]) -> bool {
    descriptions.iter().any(|d| !d.is_empty() && (d.contains(phrase) || phrase.contains(d)))
}

/// Drawable phrases for the given concept nodes, minus any already used in
/// an element description.
pub fn suggest_visual_elements(
    session: &LearningSession,
    gateway: &Gateway,
    node_ids: &[String],
) -> Result<Vec<String>> {
    if node_ids.is_empty() {
        return Err(Error::InvalidArgument("select at least one concept node".into()));
    }
    let labels: Vec<String> = node_ids
        .iter()
        .map(|id| {
            session
                .map
                .node(id)
                .map(|n| n.label.clone())
                .ok_or_else(|| Error::UnknownNode(id.clone()))
        })
        .collect::<Result<_>>()?;
    let descriptions: Vec<&str> = session
        .canvas
        .elements
        .iter()
        .map(|e| e.description.as_str())
        .collect();
    let v = vars([("nodes", json!(labels)), ("existing", json!(descriptions))]);
    let phrases = sentences(
        gateway.call_text(TemplateId::ImageryRecommender, &v, &[])?,
        TemplateId::ImageryRecommender,
    )?;
    Ok(phrases.into_iter().filter(|p| !echoes(p, &descriptions)).collect())
}

fn element_text(session: &LearningSession, element_id: &str) -> Result<String> {
    let e = session
        .canvas
        .element(element_id)
        .ok_or_else(|| Error::UnknownElement(element_id.to_string()))?;
    if !e.description.is_empty() {
        return Ok(e.description.clone());
    }
    let labels: Vec<String> = e
        .tags
        .iter()
        .filter_map(|t| session.map.node(t).map(|n| n.label.clone()))
        .collect();
    Ok(labels.join(", "))
}

/// One-sentence scene links between two elements.
pub fn suggest_relations(
    session: &LearningSession,
    gateway: &Gateway,
    element_a: &str,
    element_b: &str,
) -> Result<Vec<String>> {
    let v = vars([
        ("left", Value::String(element_text(session, element_a)?)),
        ("right", Value::String(element_text(session, element_b)?)),
    ]);
    sentences(gateway.call_text(TemplateId::SceneRelation, &v, &[])?, TemplateId::SceneRelation)
}

impl LearningSession {
    fn choice_for_anchor(&self, anchor_id: &str) -> Option<&crate::keywords::KeywordChoice> {
        self.choices.iter().find(|c| c.node_id == anchor_id)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::gateway::mock::{Fixture, MockProvider};
    use crate::gateway::provider::ProviderConfig;
    use crate::gateway::template::TemplateSet;
    use crate::keywords::{KeywordSource, Origin};
    use crate::profile::LanguageProfile;
    use crate::session::tests_support::labyrinth_session;

    fn gateway(script: Vec<Fixture>) -> (Gateway, Arc<MockProvider>) {
        let mock = Arc::new(MockProvider::new(script));
        let gw = Gateway::new(
            mock.clone(),
            TemplateSet::builtin("zh").unwrap(),
            LanguageProfile::zh(),
            ProviderConfig::default(),
        );
        (gw, mock)
    }

    fn candidates(words: &[&str]) -> Fixture {
        let items: Vec<Value> = words
            .iter()
            .map(|w| json!({"keyword": w, "explanation": format!("{w}的解释")}))
            .collect();
        Fixture::text(Value::Array(items).to_string())
    }

    fn review(words: &[&str]) -> Fixture {
        let items: Vec<Value> = words
            .iter()
            .map(|w| json!({"keyword": w, "explanation": "e", "reasoning": "r"}))
            .collect();
        Fixture::text(Value::Array(items).to_string())
    }

    const TEN: [&str; 10] = ["晕死", "忍", "人声", "流星", "林色", "仁慈", "任性", "吝啬", "凛冽", "淋湿"];

    #[test]
    fn semantic_suggestions_drop_existing() {
        let mut s = labyrinth_session();
        let meaning = s.map.meaning_node().node_id.clone();
        s.add_semantic_node(&meaning, None, "通道", "", "", Origin::User, 1).unwrap();
        let (gw, mock) = gateway(vec![Fixture::text(
            r#"[{"concept": "错综复杂", "translation": "intricate"}, {"concept": "通道", "translation": "passage"}]"#,
        )]);
        let got = suggest_semantic_nodes(&s, &gw, &meaning, 3).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].concept, "错综复杂");
        let prompt = &mock.calls()[0].prompt;
        assert!(prompt.contains("Target word: labyrinth (迷宫)"));
        assert!(prompt.contains("No more than 5 Chinese characters."));
    }

    #[test]
    fn keyword_pipeline_temperatures_and_exclusion() {
        let mut s = labyrinth_session();
        let seg = s.brush_segment(4, 8, 1).unwrap();
        let (gw, mock) = gateway(vec![
            candidates(&TEN),
            review(&["晕死", "忍", "人声", "流星"]),
            candidates(&TEN),
            review(&["林色", "仁慈", "任性", "吝啬"]),
        ]);
        let cards = suggest_keywords(&s, &gw, &seg.segment_id, &[]).unwrap();
        assert_eq!(cards.len(), 4);
        s.record_keyword_batch(&seg.segment_id, vec![], cards, 2).unwrap();
        let again = suggest_keywords(&s, &gw, &seg.segment_id, &[]).unwrap();
        assert!(again.iter().all(|c| !s.shown_keywords().contains(&c.keyword)));
        let calls = mock.calls();
        assert_eq!(calls[0].temperature, Some(1.0));
        assert_eq!(calls[1].temperature, Some(0.3));
        assert!(calls[0].prompt.contains("IPA: /rɪnθ/"));
        assert!(calls[3].prompt.contains(r#"never select these: ["晕死","忍","人声","流星"]"#));
        assert!(!calls[3].prompt.contains(r#""keyword":"晕死""#));
    }

    #[test]
    fn keyword_pipeline_failures() {
        let s0 = labyrinth_session();
        let mut s = s0.clone();
        let seg = s.brush_segment(4, 8, 1).unwrap();
        let (gw, mock) = gateway(vec![candidates(&TEN[..9]), candidates(&TEN[..9])]);
        assert!(matches!(suggest_keywords(&s, &gw, &seg.segment_id, &[]), Err(Error::Format { .. })));
        assert_eq!(mock.served(), 2);
        let five = ["晕死", "忍", "人声", "流星", "林色"];
        let (gw, _) = gateway(vec![candidates(&TEN), review(&five), review(&five)]);
        assert!(matches!(suggest_keywords(&s, &gw, &seg.segment_id, &[]), Err(Error::Format { .. })));
        assert!(matches!(
            suggest_keywords(&s0, &gw, "seg-9999", &[]),
            Err(Error::UnknownSegment(_))
        ));
    }

    #[test]
    fn hints_include_notes_and_chain() {
        let mut s = labyrinth_session();
        let seg = s.brush_segment(0, 3, 1).unwrap();
        let c = s
            .select_keyword(&seg.segment_id, KeywordSource::User { keyword: "喇叭".into(), explanation: String::new() }, vec![], 2)
            .unwrap();
        let maze = s.map.meaning_node().node_id.clone();
        let link = s.map.link_between(&c.node_id, &maze).unwrap().link_id.clone();
        s.set_chain(&link, "dizziness", 3).unwrap();
        s.add_note(&link, "first note", 4).unwrap();
        s.add_note(&link, "second note", 5).unwrap();
        let before = s.clone();
        let (gw, mock) = gateway(vec![Fixture::text(r#"["a","b","The speaker may produce echoes in the labyrinth."]"#)]);
        let hints = suggest_hints(&s, &gw, &link).unwrap();
        assert!(hints.contains(&"The speaker may produce echoes in the labyrinth.".to_string()));
        assert_eq!(s, before);
        let prompt = &mock.calls()[0].prompt;
        for needle in ["first note", "second note", "dizziness", "喇叭", "迷宫"] {
            assert!(prompt.contains(needle), "{needle}");
        }
    }

    #[test]
    fn visual_elements_filter_echoes() {
        let mut s = labyrinth_session();
        let maze = s.map.meaning_node().node_id.clone();
        s.add_element(crate::canvas::BBox::new(0.1, 0.1, 0.3, 0.3), vec![maze.clone()], "高墙迷宫", 1)
            .unwrap();
        let (gw, _) = gateway(vec![Fixture::text(r#"["高墙迷宫", "迷宫", "石板路", "现代化进程的象征"]"#)]);
        let got = suggest_visual_elements(&s, &gw, &[maze]).unwrap();
        assert_eq!(got, ["石板路"]);
        assert!(suggest_visual_elements(&s, &gw, &[]).is_err());
    }
}
