//! Randomized two-stage keyword outputs with an independent prediction of
//! what the gateway must return for each.

use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use wordcraft_core::keywords::KeywordCardDraft;
use wordcraft_core::suggest::suggest_keywords;
use wordcraft_core::{Error, Fixture, Gateway, LanguageProfile, LearningSession, MockProvider, ProviderConfig, TemplateSet};

pub const SHOWN: [&str; 4] = ["旧一", "旧二", "旧三", "旧四"];

pub fn gateway(mock: &Arc<MockProvider>) -> Gateway {
    Gateway::new(
        mock.clone(),
        TemplateSet::builtin("zh").unwrap(),
        LanguageProfile::zh(),
        ProviderConfig::default(),
    )
}

pub fn draft(k: &str) -> KeywordCardDraft {
    KeywordCardDraft {
        keyword: k.into(),
        explanation: "e".into(),
        reasoning: "r".into(),
    }
}

/// A labyrinth session with one segment and one earlier batch on screen.
pub fn session() -> (LearningSession, String) {
    let mut s = super::session_for("w-labyrinth", "s-1");
    let seg = s.brush_segment(4, 8, 1).unwrap().segment_id;
    s.record_keyword_batch(&seg, vec![], SHOWN.iter().map(|k| draft(k)).collect(), 2).unwrap();
    (s, seg)
}

pub fn wrap(rng: &mut StdRng, array: String) -> String {
    match rng.gen_range(0..3) {
        0 => array,
        1 => format!("Here are the results:\n{array}\nLet me know if you need more [options]."),
        _ => format!("```json\n{array}\n```"),
    }
}

/// One stage-one answer and whether it should pass.
pub fn stage_one(rng: &mut StdRng) -> (String, bool) {
    if rng.gen_bool(0.05) {
        return ("I could not think of any homophones.".into(), false);
    }
    let distinct = rng.gen_range(6..26);
    let mut items: Vec<Value> = (0..distinct)
        .map(|i| {
            let k = format!("词{i}");
            if rng.gen_bool(0.2) {
                Value::String(k)
            } else {
                json!({"keyword": k, "explanation": "解释"})
            }
        })
        .collect();
    for _ in 0..rng.gen_range(0..4) {
        let i = rng.gen_range(0..distinct);
        items.push(json!({"keyword": format!("词{i}"), "explanation": "重复"}));
    }
    for _ in 0..rng.gen_range(0..3) {
        items.push(json!({"keyword": "", "explanation": "空"}));
    }
    let ok = distinct >= 10;
    (wrap(rng, Value::Array(items).to_string()), ok)
}

/// One stage-two answer, whether it should pass, and its keywords.
pub fn stage_two(rng: &mut StdRng) -> (String, bool, Vec<String>) {
    let count = *[3usize, 4, 4, 4, 4, 5].get(rng.gen_range(0..6)).unwrap();
    let mut keywords: Vec<String> = (0..count).map(|i| format!("卡{i}")).collect();
    let mut ok = count == 4;
    if rng.gen_bool(0.15) {
        keywords[count - 1] = keywords[0].clone();
        ok = false;
    }
    if rng.gen_bool(0.15) {
        keywords[rng.gen_range(0..count)] = SHOWN[rng.gen_range(0..4)].to_string();
        ok = false;
    }
    let blank = rng.gen_bool(0.15).then(|| rng.gen_range(0..count));
    if blank.is_some() {
        ok = false;
    }
    let items: Vec<Value> = keywords
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let reasoning = if blank == Some(i) { "" } else { "发音接近" };
            json!({"keyword": k, "explanation": "释义", "reasoning": reasoning})
        })
        .collect();
    (wrap(rng, Value::Array(items).to_string()), ok, keywords)
}

#[derive(Debug, PartialEq)]
pub enum Expect {
    Cards(Vec<String>),
    Format(&'static str),
}

/// Counts of batches and format errors seen in a fuzz run.
#[derive(Debug, Default, Clone, Copy)]
pub struct FuzzReport {
    pub batches: usize,
    pub format_errors: usize,
}

/// Runs `calls` fuzzed suggestions and compares each against the oracle.
pub fn fuzz(seed: u64, calls: usize) -> Result<FuzzReport, String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let (s, seg) = session();
    let mut report = FuzzReport::default();
    for call in 0..calls {
        let one = [stage_one(&mut rng), stage_one(&mut rng)];
        let two = [stage_two(&mut rng), stage_two(&mut rng)];
        let first_ok = one.iter().position(|(_, ok)| *ok);
        let second_ok = two.iter().position(|(_, ok, _)| *ok);
        let n1 = first_ok.map_or(2, |i| i + 1);
        let n2 = second_ok.map_or(2, |i| i + 1);
        let mut script: Vec<Fixture> = one[..n1].iter().map(|(t, _)| Fixture::text(t)).collect();
        script.extend(two[..n2].iter().map(|(t, _, _)| Fixture::text(t)));

        let (served, expect) = match (first_ok, second_ok) {
            (None, _) => (n1, Expect::Format("keyword_gen")),
            (Some(_), None) => (n1 + n2, Expect::Format("keyword_review")),
            (Some(_), Some(i)) => (n1 + n2, Expect::Cards(two[i].2.clone())),
        };

        let mock = Arc::new(MockProvider::new(script));
        let got = match suggest_keywords(&s, &gateway(&mock), &seg, &[]) {
            Ok(cards) => {
                if cards.len() != 4 {
                    return Err(format!("call {call}: {} cards", cards.len()));
                }
                if cards.iter().any(|c| c.keyword.is_empty() || c.explanation.is_empty() || c.reasoning.is_empty()) {
                    return Err(format!("call {call}: a card with an empty field escaped"));
                }
                report.batches += 1;
                Expect::Cards(cards.into_iter().map(|c| c.keyword).collect())
            }
            Err(Error::Format { template, .. }) => {
                report.format_errors += 1;
                match template.as_str() {
                    "keyword_gen" => Expect::Format("keyword_gen"),
                    "keyword_review" => Expect::Format("keyword_review"),
                    other => return Err(format!("call {call}: format error from {other}")),
                }
            }
            Err(e) => return Err(format!("call {call}: unexpected error {e}")),
        };
        if got != expect {
            return Err(format!("call {call}: got {got:?}, oracle says {expect:?}"));
        }
        if mock.served() != served {
            return Err(format!("call {call}: {} provider calls, oracle says {served}", mock.served()));
        }
    }
    Ok(report)
}
