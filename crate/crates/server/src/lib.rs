//! JSON-over-HTTP API for wordcraft sessions, suggestions, image jobs and
//! word cards.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use clap::Parser;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use wordcraft_core::gateway::mock::load_script;
use wordcraft_core::{
    BBox, Config, Error, ErrorCode, KeywordSource, MockProvider, NewSemanticNode, Provider, Stage, Wordcraft,
};

/// Command-line options. Flags override values from `--config`.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "wordcraft-server", version, about = "Serve the wordcraft HTTP API")]
pub struct Cli {
    /// Port to listen on.
    #[arg(long)]
    pub port: Option<u16>,
    /// Directory for sessions, jobs and cards.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Serve scripted provider responses instead of calling a live model.
    #[arg(long)]
    pub mock_provider: bool,
    /// JSON fixture script for the mock provider.
    #[arg(long, requires = "mock_provider")]
    pub mock_script: Option<PathBuf>,
    /// Language-pair profile (`zh` or `en`).
    #[arg(long)]
    pub profile: Option<String>,
    /// Image worker threads.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl Cli {
    pub fn to_config(&self) -> Result<Config, Error> {
        let mut config = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        if let Some(port) = self.port {
            config.port = port;
        }
        if let Some(dir) = &self.data_dir {
            config.data_dir = dir.clone();
        }
        if let Some(profile) = &self.profile {
            config.profile = profile.clone();
        }
        if let Some(workers) = self.workers {
            config.workers = workers;
        }
        Ok(config)
    }

    pub fn provider(&self, config: &Config) -> Result<Arc<dyn Provider>, Error> {
        if self.mock_provider {
            let script = match &self.mock_script {
                Some(path) => load_script(path)?,
                None => Vec::new(),
            };
            Ok(Arc::new(MockProvider::new(script)))
        } else {
            let mut config = config.clone();
            config.provider = config.provider.with_env();
            wordcraft_core::service::live_provider(&config)
        }
    }

    /// Validates configuration and opens the data directory.
    pub fn build(&self) -> Result<(Config, Wordcraft), Error> {
        let config = self.to_config()?;
        let provider = self.provider(&config)?;
        let app = Wordcraft::open(&config, provider)?;
        Ok((config, app))
    }
}

/// Error body returned by every failing route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub details: Value,
}

pub fn status_for(code: ErrorCode) -> StatusCode {
    use ErrorCode::*;
    match code {
        UnknownWord | UnknownSense | UnknownSession | UnknownAnchor | UnknownSemanticNode | UnknownSegment
        | UnknownCard | UnknownKeyword | UnknownNode | UnknownLink | UnknownElement | UnknownRelation
        | UnknownJob | UnknownWordCard | NotFound => StatusCode::NOT_FOUND,
        RecallPathIncomplete | SessionClosed | JobPending | NoImage | DuplicateWordId => StatusCode::CONFLICT,
        ProviderError | FormatError | ContentPolicyRejection | ScriptExhausted => StatusCode::BAD_GATEWAY,
        TimeoutError => StatusCode::GATEWAY_TIMEOUT,
        BadRequest => StatusCode::BAD_REQUEST,
        Unauthorized => StatusCode::UNAUTHORIZED,
        ConfigError | StorageError | MissingVariable | UnknownTemplate | TemplateError | ParseError
        | MissingResponse | PortInUse => StatusCode::INTERNAL_SERVER_ERROR,
        OverlapError | RangeError | PaletteExhausted | DepthExceeded | DuplicateConcept | InvalidChain
        | SelfLink | EmptyNote | TextTooLong | UnknownConceptTag | BadBbox | UnknownStyle | InvalidArgument => {
            StatusCode::UNPROCESSABLE_ENTITY
        }
    }
}

pub struct Failure(ErrorCode, ApiError);

impl Failure {
    fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Failure(
            code,
            ApiError {
                code: code.as_str().to_string(),
                message: message.into(),
                details: Value::Null,
            },
        )
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = e.code();
        if status_for(code).is_server_error() {
            tracing::warn!(code = code.as_str(), error = %e, "request failed");
        }
        Failure(
            code,
            ApiError {
                code: code.as_str().to_string(),
                message: e.to_string(),
                details: e.details(),
            },
        )
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        (status_for(self.0), Json(self.1)).into_response()
    }
}

type ApiResult<T> = Result<T, Failure>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    let text: &[u8] = if body.iter().all(u8::is_ascii_whitespace) { b"{}" } else { body };
    serde_json::from_slice(text).map_err(|e| Failure::new(ErrorCode::BadRequest, format!("invalid request body: {e}")))
}

/// Runs blocking service code off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, Error> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| Failure::new(ErrorCode::StorageError, format!("worker failed: {e}")))?
        .map_err(Failure::from)
}

async fn json<T: Serialize + Send + 'static>(f: impl FnOnce() -> Result<T, Error> + Send + 'static) -> ApiResult<Json<T>> {
    blocking(f).await.map(Json)
}

#[derive(Clone)]
struct AppState {
    app: Wordcraft,
    token: Option<Arc<str>>,
}

pub fn router(app: Wordcraft) -> Router {
    router_with_token(app, None)
}

/// Router that requires `Authorization: Bearer <token>` when a token is set.
pub fn router_with_token(app: Wordcraft, token: Option<String>) -> Router {
    let state = AppState {
        app,
        token: token.map(Arc::from),
    };
    Router::new()
        .route("/healthz", get(health))
        .route("/lexicon/words", get(search_words))
        .route("/lexicon/words/{word_id}", get(get_word))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/events", get(get_events))
        .route("/sessions/{id}/stage", post(goto_stage))
        .route("/sessions/{id}/tick", post(tick))
        .route("/sessions/{id}/segments", post(brush_segment).delete(clear_segments))
        .route("/sessions/{id}/tree/nodes", post(add_tree_node))
        .route("/sessions/{id}/tree/{anchor}/suggest", post(suggest_tree))
        .route("/sessions/{id}/segments/{sid}/keywords/suggest", post(suggest_keywords))
        .route("/sessions/{id}/segments/{sid}/keywords/select", post(select_keyword))
        .route("/sessions/{id}/keywords/{kid}/replace", post(replace_keyword))
        .route("/sessions/{id}/map", patch(patch_map))
        .route("/sessions/{id}/map/links", post(upsert_link))
        .route("/sessions/{id}/map/links/{lid}", patch(patch_link).delete(delete_link))
        .route("/sessions/{id}/map/links/{lid}/hints", post(link_hints))
        .route("/sessions/{id}/canvas/elements", post(add_element))
        .route("/sessions/{id}/canvas/elements/{eid}", patch(update_element).delete(delete_element))
        .route("/sessions/{id}/canvas/relations", post(add_relation))
        .route("/sessions/{id}/canvas/relations/{rid}", axum::routing::delete(delete_relation))
        .route("/sessions/{id}/canvas/suggest-elements", post(suggest_elements))
        .route("/sessions/{id}/canvas/suggest-relations", post(suggest_relations))
        .route("/sessions/{id}/recall-path", get(recall_path))
        .route("/sessions/{id}/image", post(request_image))
        .route("/jobs/{jid}", get(get_job))
        .route("/sessions/{id}/card", post(record_card))
        .route("/cards", get(list_cards))
        .route("/cards/{id}", get(get_card))
        .route("/cards/{id}/image", get(card_image))
        .fallback(not_found)
        .method_not_allowed_fallback(not_found)
        .layer(middleware::from_fn_with_state(state.clone(), authorize))
        .with_state(state)
}

async fn authorize(State(state): State<AppState>, request: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let ok = request
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|given| given == &**token);
        if !ok {
            return Failure::new(ErrorCode::Unauthorized, "missing or invalid bearer token").into_response();
        }
    }
    next.run(request).await
}

async fn not_found() -> Failure {
    Failure::new(ErrorCode::NotFound, "no such route")
}

async fn health(State(s): State<AppState>) -> Json<wordcraft_core::service::Health> {
    Json(s.app.health())
}

#[derive(Deserialize)]
struct WordQuery {
    #[serde(default)]
    q: String,
    #[serde(default = "default_limit")]
    limit: usize,
}

fn default_limit() -> usize {
    50
}

async fn search_words(State(s): State<AppState>, Query(q): Query<WordQuery>) -> Json<Value> {
    Json(json!({ "words": s.app.search_words(&q.q, q.limit) }))
}

async fn get_word(State(s): State<AppState>, Path(word_id): Path<String>) -> ApiResult<Json<wordcraft_core::WordEntry>> {
    json(move || s.app.word(&word_id)).await
}

#[derive(Deserialize)]
struct CreateSession {
    word_id: String,
    #[serde(default)]
    sense_id: Option<String>,
}

async fn create_session(State(s): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: CreateSession = parse(&body)?;
    let session = blocking(move || s.app.create_session(&req.word_id, req.sense_id.as_deref())).await?;
    Ok((StatusCode::CREATED, Json(session)).into_response())
}

async fn list_sessions(State(s): State<AppState>) -> ApiResult<Json<Value>> {
    json(move || Ok(json!({ "sessions": s.app.list_sessions()? }))).await
}

async fn get_session(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<wordcraft_core::LearningSession>> {
    json(move || s.app.session(&id)).await
}

async fn get_events(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    json(move || Ok(json!({ "events": s.app.events(&id)? }))).await
}

#[derive(Deserialize)]
struct GotoStage {
    stage: Stage,
}

async fn goto_stage(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<wordcraft_core::LearningSession>> {
    let req: GotoStage = parse(&body)?;
    json(move || s.app.goto_stage(&id, req.stage)).await
}

#[derive(Deserialize)]
struct Tick {
    delta_ms: u64,
}

async fn tick(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: Tick = parse(&body)?;
    json(move || Ok(json!({ "total_active_ms": s.app.tick(&id, req.delta_ms)? }))).await
}

#[derive(Deserialize)]
struct Brush {
    start: usize,
    end: usize,
}

async fn brush_segment(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req: Brush = parse(&body)?;
    let segment = blocking(move || s.app.brush_segment(&id, req.start, req.end)).await?;
    Ok((StatusCode::CREATED, Json(segment)).into_response())
}

async fn clear_segments(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<wordcraft_core::LearningSession>> {
    json(move || s.app.clear_segments(&id)).await
}

async fn add_tree_node(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req: NewSemanticNode = parse(&body)?;
    let node = blocking(move || s.app.add_semantic_node(&id, &req)).await?;
    Ok((StatusCode::CREATED, Json(node)).into_response())
}

#[derive(Deserialize)]
struct SuggestTree {
    #[serde(default = "default_suggestions")]
    count: usize,
}

fn default_suggestions() -> usize {
    5
}

async fn suggest_tree(
    State(s): State<AppState>,
    Path((id, anchor)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let req: SuggestTree = parse(&body)?;
    json(move || Ok(json!({ "suggestions": s.app.suggest_semantic_nodes(&id, &anchor, req.count)? }))).await
}

#[derive(Deserialize)]
struct NodeIds {
    #[serde(default)]
    node_ids: Vec<String>,
}

async fn suggest_keywords(
    State(s): State<AppState>,
    Path((id, sid)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Json<wordcraft_core::KeywordBatch>> {
    let req: NodeIds = parse(&body)?;
    json(move || s.app.suggest_keywords(&id, &sid, &req.node_ids)).await
}

#[derive(Deserialize)]
struct SelectKeyword {
    source: KeywordSource,
    #[serde(default)]
    chain_node_ids: Vec<String>,
}

async fn select_keyword(
    State(s): State<AppState>,
    Path((id, sid)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Json<wordcraft_core::KeywordChoice>> {
    let req: SelectKeyword = parse(&body)?;
    json(move || s.app.select_keyword(&id, &sid, req.source, req.chain_node_ids)).await
}

#[derive(Deserialize)]
struct ReplaceKeyword {
    source: KeywordSource,
}

async fn replace_keyword(
    State(s): State<AppState>,
    Path((id, kid)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Json<wordcraft_core::KeywordChoice>> {
    let req: ReplaceKeyword = parse(&body)?;
    json(move || s.app.replace_keyword(&id, &kid, req.source)).await
}

#[derive(Deserialize)]
struct PatchMap {
    association: String,
}

async fn patch_map(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<wordcraft_core::LearningSession>> {
    let req: PatchMap = parse(&body)?;
    json(move || s.app.set_association(&id, &req.association)).await
}

#[derive(Deserialize)]
struct NewLink {
    node_a: String,
    node_b: String,
}

async fn upsert_link(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<wordcraft_core::AssociationLink>> {
    let req: NewLink = parse(&body)?;
    json(move || s.app.upsert_link(&id, &req.node_a, &req.node_b)).await
}

#[derive(Deserialize)]
struct PatchLink {
    #[serde(default)]
    chain: Option<String>,
    #[serde(default)]
    note: Option<String>,
}

async fn patch_link(
    State(s): State<AppState>,
    Path((id, lid)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Json<wordcraft_core::AssociationLink>> {
    let req: PatchLink = parse(&body)?;
    json(move || s.app.update_link(&id, &lid, req.chain.as_deref(), req.note.as_deref())).await
}

async fn delete_link(State(s): State<AppState>, Path((id, lid)): Path<(String, String)>) -> ApiResult<StatusCode> {
    blocking(move || s.app.delete_link(&id, &lid)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn link_hints(State(s): State<AppState>, Path((id, lid)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    json(move || Ok(json!({ "hints": s.app.suggest_hints(&id, &lid)? }))).await
}

#[derive(Deserialize)]
struct NewElement {
    bbox: BBox,
    tags: Vec<String>,
    #[serde(default)]
    description: String,
}

async fn add_element(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req: NewElement = parse(&body)?;
    let element = blocking(move || s.app.add_element(&id, req.bbox, req.tags, &req.description)).await?;
    Ok((StatusCode::CREATED, Json(element)).into_response())
}

#[derive(Deserialize)]
struct PatchElement {
    #[serde(default)]
    bbox: Option<BBox>,
    #[serde(default)]
    tags: Option<Vec<String>>,
    #[serde(default)]
    description: Option<String>,
}

async fn update_element(
    State(s): State<AppState>,
    Path((id, eid)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Json<wordcraft_core::CanvasElement>> {
    let req: PatchElement = parse(&body)?;
    json(move || s.app.update_element(&id, &eid, req.bbox, req.tags, req.description)).await
}

async fn delete_element(State(s): State<AppState>, Path((id, eid)): Path<(String, String)>) -> ApiResult<StatusCode> {
    blocking(move || s.app.delete_element(&id, &eid)).await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize)]
struct NewRelation {
    endpoints: [String; 2],
    #[serde(default)]
    text: String,
}

async fn add_relation(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req: NewRelation = parse(&body)?;
    let [a, b] = req.endpoints;
    let relation = blocking(move || s.app.add_relation(&id, &a, &b, &req.text)).await?;
    Ok((StatusCode::CREATED, Json(relation)).into_response())
}

async fn delete_relation(State(s): State<AppState>, Path((id, rid)): Path<(String, String)>) -> ApiResult<StatusCode> {
    blocking(move || s.app.delete_relation(&id, &rid)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn suggest_elements(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: NodeIds = parse(&body)?;
    json(move || Ok(json!({ "suggestions": s.app.suggest_visual_elements(&id, &req.node_ids)? }))).await
}

#[derive(Deserialize)]
struct ElementPair {
    element_ids: [String; 2],
}

async fn suggest_relations(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: ElementPair = parse(&body)?;
    let [a, b] = req.element_ids;
    json(move || Ok(json!({ "suggestions": s.app.suggest_relations(&id, &a, &b)? }))).await
}

async fn recall_path(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<wordcraft_core::RecallPath>> {
    json(move || s.app.recall_path(&id)).await
}

#[derive(Deserialize)]
struct ImageBody {
    style: String,
    #[serde(default)]
    idempotency_key: Option<String>,
}

async fn request_image(
    State(s): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let req: ImageBody = parse(&body)?;
    let key = req.idempotency_key.or_else(|| {
        headers
            .get("idempotency-key")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string)
    });
    let job = blocking(move || s.app.request_image(&id, &req.style, key.as_deref())).await?;
    Ok((StatusCode::ACCEPTED, Json(job)).into_response())
}

async fn get_job(State(s): State<AppState>, Path(jid): Path<String>) -> ApiResult<Json<wordcraft_core::ImageJob>> {
    json(move || s.app.job(&jid)).await
}

#[derive(Deserialize)]
struct RecordCard {
    #[serde(default)]
    allow_no_image: bool,
}

async fn record_card(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req: RecordCard = parse(&body)?;
    let card = blocking(move || s.app.record_card(&id, req.allow_no_image)).await?;
    Ok((StatusCode::CREATED, Json(card)).into_response())
}

async fn list_cards(State(s): State<AppState>) -> ApiResult<Json<Value>> {
    json(move || Ok(json!({ "cards": s.app.list_cards()? }))).await
}

async fn get_card(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let bytes = blocking(move || s.app.card_json(&id)).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn card_image(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let bytes = blocking(move || s.app.card_image(&id)).await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

/// Startup failure with a stable code.
#[derive(Debug)]
pub struct StartupError {
    pub code: ErrorCode,
    pub message: String,
}

impl std::fmt::Display for StartupError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for StartupError {}

impl From<Error> for StartupError {
    fn from(e: Error) -> Self {
        Self {
            code: e.code(),
            message: e.to_string(),
        }
    }
}

/// Binds the configured port.
pub async fn bind(port: u16) -> Result<tokio::net::TcpListener, StartupError> {
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    tokio::net::TcpListener::bind(addr).await.map_err(|e| StartupError {
        code: if e.kind() == std::io::ErrorKind::AddrInUse {
            ErrorCode::PortInUse
        } else {
            ErrorCode::ConfigError
        },
        message: format!("cannot listen on {addr}: {e}"),
    })
}

/// Builds the service from `cli` and serves until the process exits.
pub async fn run(cli: Cli) -> Result<(), StartupError> {
    let (config, app) = tokio::task::spawn_blocking(move || cli.build())
        .await
        .map_err(|e| StartupError {
            code: ErrorCode::ConfigError,
            message: e.to_string(),
        })??;
    let token = config.auth_token_env.as_deref().and_then(|name| std::env::var(name).ok());
    let listener = bind(config.port).await?;
    let health = app.health();
    tracing::info!(port = config.port, mode = ?health.mode, profile = %health.profile, "listening");
    axum::serve(listener, router_with_token(app, token))
        .await
        .map_err(|e| StartupError {
            code: ErrorCode::StorageError,
            message: e.to_string(),
        })
}
