#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::{Body, Bytes};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use wordcraft_core::gateway::mock::load_script;
use wordcraft_core::{Config, FixedClock, MockProvider, Wordcraft};

pub const STARTED_AT: u64 = 1_760_000_000_000;

pub fn scenario_script() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/labyrinth.json")
}

pub fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// A service over `dir` with a fixed clock and the given mock.
pub fn open(dir: &Path, mock: Arc<MockProvider>) -> Wordcraft {
    let config = Config {
        data_dir: dir.to_path_buf(),
        workers: 1,
        ..Config::default()
    };
    Wordcraft::open_with_clock(&config, mock, Arc::new(FixedClock(STARTED_AT))).unwrap()
}

pub fn labyrinth_mock() -> Arc<MockProvider> {
    Arc::new(MockProvider::new(load_script(&scenario_script()).unwrap()))
}

#[derive(Clone)]
pub struct Client {
    router: Router,
}

pub struct Reply {
    pub status: StatusCode,
    pub bytes: Bytes,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or(Value::Null)
    }
}

impl Client {
    pub fn new(router: Router) -> Self {
        Self { router }
    }

    pub async fn send(&self, method: Method, path: &str, body: Option<Value>, headers: &[(&str, &str)]) -> Reply {
        let mut req = Request::builder().method(method).uri(path);
        for (k, v) in headers {
            req = req.header(*k, *v);
        }
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let resp = self.router.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        Reply { status, bytes }
    }

    pub async fn get(&self, path: &str) -> Reply {
        self.send(Method::GET, path, None, &[]).await
    }

    pub async fn post(&self, path: &str, body: Value) -> Reply {
        self.send(Method::POST, path, Some(body), &[]).await
    }

    pub async fn patch(&self, path: &str, body: Value) -> Reply {
        self.send(Method::PATCH, path, Some(body), &[]).await
    }

    pub async fn delete(&self, path: &str) -> Reply {
        self.send(Method::DELETE, path, None, &[]).await
    }
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}
#[allow(unused_imports)]
pub(crate) use ensure;

/// Checks the status and returns the body.
pub fn expect(reply: Reply, status: StatusCode, what: &str) -> Result<Value, String> {
    ensure!(
        reply.status == status,
        "{what}: expected {status}, got {} {}",
        reply.status,
        String::from_utf8_lossy(&reply.bytes)
    );
    Ok(reply.json())
}

fn str_of(v: &Value, key: &str) -> Result<String, String> {
    v[key].as_str().map(str::to_string).ok_or_else(|| format!("no `{key}` in {v}"))
}

pub struct Outcome {
    pub session_id: String,
    pub card_id: String,
    pub card_bytes: Bytes,
    pub gating: Value,
    pub elapsed: Duration,
}

/// Drives the labyrinth walkthrough end to end over HTTP.
pub async fn labyrinth(c: &Client) -> Result<Outcome, String> {
    let started = Instant::now();
    let ok = StatusCode::OK;
    let created = StatusCode::CREATED;

    let s = expect(c.post("/sessions", json!({"word_id": "w-labyrinth", "sense_id": "maze"})).await, created, "create")?;
    let id = str_of(&s, "session_id")?;
    let base = format!("/sessions/{id}");
    let maze = str_of(&s["map"]["nodes"][0], "node_id")?;
    ensure!(s["map"]["nodes"][0]["label"] == "迷宫", "meaning node {}", s["map"]["nodes"][0]);
    let word_anchor = s["tree"]["anchors"]
        .as_array()
        .and_then(|a| a.iter().find(|x| x["concept"] == "labyrinth"))
        .map(|a| a["anchor_id"].as_str().unwrap_or_default().to_string())
        .ok_or("no anchor for the word")?;

    let seg_a = expect(c.post(&format!("{base}/segments"), json!({"start": 0, "end": 3})).await, created, "segment 1")?;
    let seg_a = str_of(&seg_a, "segment_id")?;
    let laba = expect(
        c.post(
            &format!("{base}/segments/{seg_a}/keywords/select"),
            json!({"source": {"type": "user", "keyword": "喇叭"}}),
        )
        .await,
        ok,
        "select 喇叭",
    )?;
    let laba = str_of(&laba, "node_id")?;
    let link = expect(c.post(&format!("{base}/map/links"), json!({"node_a": maze, "node_b": laba})).await, ok, "link")?;
    let maze_laba = str_of(&link, "link_id")?;
    expect(
        c.patch(
            &format!("{base}/map/links/{maze_laba}"),
            json!({"note": "The speaker can guide the way in the labyrinth"}),
        )
        .await,
        ok,
        "note",
    )?;

    let seg_b = expect(c.post(&format!("{base}/segments"), json!({"start": 4, "end": 8})).await, created, "segment 2")?;
    let seg_b = str_of(&seg_b, "segment_id")?;
    let loud = expect(
        c.post(&format!("{base}/tree/nodes"), json!({"anchor_id": laba, "concept": "大声", "translation": "loud"})).await,
        created,
        "tree node 大声",
    )?;
    let loud = str_of(&loud, "node_id")?;
    let sugg = expect(c.post(&format!("{base}/tree/{word_anchor}/suggest"), json!({"count": 3})).await, ok, "tree suggest")?;
    let concepts: Vec<&str> = sugg["suggestions"].as_array().map_or(vec![], |a| a.iter().filter_map(|x| x["concept"].as_str()).collect());
    ensure!(concepts == ["错综复杂", "出口", "墙壁"], "tree suggestions {concepts:?}");
    let intricate = expect(
        c.post(
            &format!("{base}/tree/nodes"),
            json!({"anchor_id": word_anchor, "concept": "错综复杂", "translation": "intricate", "origin": "suggested"}),
        )
        .await,
        created,
        "tree node 错综复杂",
    )?;
    let intricate = str_of(&intricate, "node_id")?;

    let batch = expect(
        c.post(&format!("{base}/segments/{seg_b}/keywords/suggest"), json!({"node_ids": [loud, intricate]})).await,
        ok,
        "keyword suggest",
    )?;
    let cards = batch["cards"].as_array().cloned().unwrap_or_default();
    let words: Vec<&str> = cards.iter().filter_map(|x| x["keyword"].as_str()).collect();
    ensure!(words == ["晕死", "忍", "人声", "流星"], "cards {words:?}");
    ensure!(
        cards.iter().all(|x| !x["explanation"].as_str().unwrap_or("").is_empty() && !x["reasoning"].as_str().unwrap_or("").is_empty()),
        "cards lack explanations"
    );
    let card = str_of(&cards[0], "card_id")?;
    let yunsi = expect(
        c.post(
            &format!("{base}/segments/{seg_b}/keywords/select"),
            json!({"source": {"type": "card", "card_id": card}, "chain_node_ids": [intricate]}),
        )
        .await,
        ok,
        "select 晕死",
    )?;
    ensure!(yunsi["chain"] == json!(["labyrinth", "错综复杂"]), "chain {}", yunsi["chain"]);
    let yunsi = str_of(&yunsi, "node_id")?;

    expect(c.patch(&format!("{base}/map/links/{maze_laba}"), json!({"chain": "dizziness"})).await, ok, "chain")?;
    let hints = expect(c.post(&format!("{base}/map/links/{maze_laba}/hints"), json!({})).await, ok, "hints")?;
    ensure!(hints["hints"].as_array().map_or(0, Vec::len) == 3, "hints {hints}");
    ensure!(hints["hints"][0] == "The speaker may produce echoes in the labyrinth.", "first hint {}", hints["hints"][0]);
    expect(c.post(&format!("{base}/map/links"), json!({"node_a": laba, "node_b": yunsi})).await, ok, "link 喇叭–晕死")?;
    expect(
        c.patch(
            &format!("{base}/map"),
            json!({"association": "I felt faint in the labyrinth filled with the echoes of speakers"}),
        )
        .await,
        ok,
        "association",
    )?;

    let e1 = expect(
        c.post(
            &format!("{base}/canvas/elements"),
            json!({
                "bbox": {"x": 0.1, "y": 0.1, "w": 0.5, "h": 0.6},
                "tags": [maze, laba],
                "description": "A complex labyrinth lined with speakers, their acoustic echoes resonating in all directions"
            }),
        )
        .await,
        created,
        "element 1",
    )?;
    let e1 = str_of(&e1, "element_id")?;
    let gating = expect(
        c.post(&format!("{base}/image"), json!({"style": "pixar_animation"})).await,
        StatusCode::CONFLICT,
        "gated image",
    )?;
    ensure!(gating["code"] == "RECALL_PATH_INCOMPLETE", "gating {gating}");
    let labels = |key: &str| -> BTreeSet<String> {
        gating["details"][key]
            .as_array()
            .map_or(BTreeSet::new(), |a| a.iter().filter_map(|m| m["label"].as_str().map(str::to_string)).collect())
    };
    ensure!(labels("missing_nodes") == BTreeSet::from(["晕死".to_string()]), "missing nodes {gating}");
    ensure!(
        labels("missing_links") == BTreeSet::from(["迷宫–晕死".to_string(), "喇叭–晕死".to_string()]),
        "missing links {gating}"
    );

    let e2 = expect(
        c.post(
            &format!("{base}/canvas/elements"),
            json!({"bbox": {"x": 0.6, "y": 0.5, "w": 0.3, "h": 0.4}, "tags": [yunsi]}),
        )
        .await,
        created,
        "element 2",
    )?;
    let e2 = str_of(&e2, "element_id")?;
    let visual = expect(c.post(&format!("{base}/canvas/suggest-elements"), json!({"node_ids": [yunsi]})).await, ok, "visual")?;
    ensure!(visual["suggestions"] == json!(["虚弱身影", "倒在地上", "眼冒金星"]), "visual {visual}");
    expect(
        c.patch(
            &format!("{base}/canvas/elements/{e2}"),
            json!({"description": "A weak person lying on the ground, eyes swirling, with little stars spinning overhead"}),
        )
        .await,
        ok,
        "describe element 2",
    )?;
    let rel = expect(c.post(&format!("{base}/canvas/suggest-relations"), json!({"element_ids": [e1, e2]})).await, ok, "relations")?;
    ensure!(rel["suggestions"].as_array().map_or(0, Vec::len) == 2, "relations {rel}");
    expect(
        c.post(
            &format!("{base}/canvas/relations"),
            json!({"endpoints": [e1, e2], "text": "This person is inside the labyrinth"}),
        )
        .await,
        created,
        "relation",
    )?;
    let path = expect(c.get(&format!("{base}/recall-path")).await, ok, "recall path")?;
    ensure!(path["is_complete"] == true, "recall path {path}");

    let job = expect(
        c.post(&format!("{base}/image"), json!({"style": "pixar_animation"})).await,
        StatusCode::ACCEPTED,
        "image",
    )?;
    let job_id = str_of(&job, "job_id")?;
    let deadline = Instant::now() + Duration::from_secs(5);
    loop {
        let job = expect(c.get(&format!("/jobs/{job_id}")).await, ok, "job")?;
        match job["state"].as_str() {
            Some("done") => break,
            Some("pending") if Instant::now() < deadline => tokio::time::sleep(Duration::from_millis(5)).await,
            other => return Err(format!("job ended as {other:?}: {job}")),
        }
    }
    expect(c.post(&format!("{base}/tick"), json!({"delta_ms": 95_000})).await, ok, "tick")?;

    let card = expect(c.post(&format!("{base}/card"), json!({})).await, created, "card")?;
    let card_id = str_of(&card, "card_id")?;
    let stored = c.get(&format!("/cards/{card_id}")).await;
    ensure!(stored.status == ok, "card fetch {}", stored.status);
    let image = c.get(&format!("/cards/{card_id}/image")).await;
    ensure!(image.status == ok && image.bytes.starts_with(b"\x89PNG"), "card image {}", image.status);
    Ok(Outcome {
        session_id: id,
        card_id,
        card_bytes: stored.bytes,
        gating,
        elapsed: started.elapsed(),
    })
}
