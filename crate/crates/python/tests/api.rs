use std::path::PathBuf;

use serde_json::json;
use wordcraft::{Api, Options};
use wordcraft_core::ErrorCode;

fn script() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../server/scenarios/labyrinth.json")
}

fn open(dir: &std::path::Path) -> Api {
    let opts = Options {
        data_dir: dir.to_path_buf(),
        mock: true,
        script: Some(script()),
        fixed_clock_ms: Some(1_760_000_000_000),
        workers: Some(1),
        ..Options::default()
    };
    Api::open(&opts).unwrap()
}

#[test]
fn json_values_round_trip_through_the_facade() {
    let dir = tempfile::tempdir().unwrap();
    let api = open(dir.path());
    assert_eq!(api.mock_remaining(), Some(7));
    let s = api.create_session("w-labyrinth", Some("maze")).unwrap();
    let sid = s["session_id"].as_str().unwrap();
    let maze = s["map"]["nodes"][0]["node_id"].as_str().unwrap().to_string();
    let seg = api.brush_segment(sid, 0, 3).unwrap();
    let seg = seg["segment_id"].as_str().unwrap();
    let laba = api
        .select_keyword(sid, seg, json!({"type": "user", "keyword": "喇叭"}), vec![])
        .unwrap();
    let laba = laba["node_id"].as_str().unwrap().to_string();
    let el = api
        .add_element(sid, json!({"x": 0.1, "y": 0.1, "w": 0.5, "h": 0.6}), vec![maze, laba], "speakers")
        .unwrap();
    assert!(el["element_id"].as_str().unwrap().starts_with("el-"));
    assert_eq!(api.recall_path(sid).unwrap()["is_complete"], true);
    assert_eq!(api.session(sid).unwrap()["session_id"], sid);
}

#[test]
fn malformed_inputs_are_invalid_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let api = open(dir.path());
    let s = api.create_session("w-labyrinth", None).unwrap();
    let sid = s["session_id"].as_str().unwrap();
    let err = api.add_element(sid, json!({"x": "left"}), vec![], "").unwrap_err();
    assert_eq!(err.code(), ErrorCode::InvalidArgument);
    let err = api.goto_stage(sid, "nowhere").unwrap_err();
    assert_eq!(err.code(), ErrorCode::InvalidArgument);
    let seg = api.brush_segment(sid, 0, 3).unwrap();
    let err = api
        .select_keyword(sid, seg["segment_id"].as_str().unwrap(), json!({"type": "psychic"}), vec![])
        .unwrap_err();
    assert_eq!(err.code(), ErrorCode::InvalidArgument);
    assert_eq!(api.session(sid).unwrap()["events"].as_array().unwrap().len(), 2);
}
