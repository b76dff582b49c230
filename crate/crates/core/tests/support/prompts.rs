//! Sample variables and verbatim constraint lines for the prompt goldens.

use std::path::PathBuf;

use serde_json::json;

use wordcraft_core::gateway::template::{vars, Vars};
use wordcraft_core::TemplateId;

pub const REQUIRED_LINES: [(TemplateId, &str); 7] = [
    (TemplateId::KeywordGen, "generate 20 candidate Chinese homophones/phrases"),
    (TemplateId::KeywordReview, "select 4 'best homophones'"),
    (TemplateId::SemanticAssoc, "No more than 5 Chinese characters."),
    (TemplateId::AssocHints, "3-5 subtle but professional Chinese sentences"),
    (TemplateId::ImageryRecommender, "2-6 Chinese characters"),
    (TemplateId::SceneRelation, "12-26 Chinese characters"),
    (TemplateId::ImageCompose, "Do not retain the black bounding box lines"),
];

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden").join(name)
}

/// Compares against the stored file; `WORDCRAFT_BLESS=1` rewrites it.
pub fn check_golden(name: &str, actual: &str) {
    let path = golden_path(name);
    if std::env::var_os("WORDCRAFT_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} drifted from its golden file");
}

pub fn sample_vars(id: TemplateId) -> Vars {
    match id {
        TemplateId::KeywordGen => vars([("ipa", json!("rɪnθ")), ("related", json!(["大声", "错综复杂"]))]),
        TemplateId::KeywordReview => vars([
            ("ipa", json!("rɪnθ")),
            ("related", json!(["大声", "错综复杂"])),
            ("candidates", json!([{"keyword": "晕死", "explanation": "头晕"}])),
            ("exclude", json!(["人参"])),
        ]),
        TemplateId::SemanticAssoc => vars([
            ("target", json!("labyrinth")),
            ("meaning", json!("迷宫")),
            ("existing", json!(["出口"])),
            ("count", json!(5)),
        ]),
        TemplateId::AssocHints => vars([
            ("entity_a", json!("迷宫")),
            ("entity_b", json!("喇叭")),
            ("chain", json!("dizziness")),
            ("notes", json!(["The speaker can guide the way in the labyrinth"])),
            ("association", json!("")),
        ]),
        TemplateId::ImageryRecommender => vars([("nodes", json!(["晕死"])), ("existing", json!([]))]),
        TemplateId::SceneRelation => vars([("left", json!("迷宫, 喇叭")), ("right", json!("晕死"))]),
        TemplateId::ImageCompose => vars([
            ("wireframe_spec", json!("Box 1: x=0.100 y=0.100 w=0.500 h=0.600 labels=[迷宫]")),
            ("region_descriptions", json!("Box 1: A complex labyrinth")),
            ("relations", json!("")),
            ("style", json!("pencil sketch")),
        ]),
    }
}

