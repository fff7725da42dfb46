//! HTTP facade over the question-answering engine.
//!
//! Routes live under `/api`: table upload and preview, column-aware question suggestions,
//! decomposition, ask-to-dashboard, health and the published JSON schemas.

pub mod store;

use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{Any, CorsLayer};

use tabqa_core::decompose::{DecomposeError, Decomposer, DecompositionTree, RuleDecomposer};
use tabqa_core::pipeline::{AskError, EngineConfig, SuggestError};
use tabqa_core::schema;
use tabqa_core::search::SearchConfig;
use tabqa_core::table::{load_table, LoadOptions, TableError};
use tabqa_neural::NeuralDecomposer;

pub use store::{Session, SessionStore};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_MAX_UPLOAD: usize = 10 * 1024 * 1024;
pub const PREVIEW_ROWS: usize = 20;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub max_upload: usize,
    pub ttl: Duration,
    /// Per-request budget for ask.
    pub deadline: Duration,
    pub beam_width: usize,
    pub spill_dir: Option<PathBuf>,
    /// Allowed browser origin; any origin when absent.
    pub cors_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            max_upload: DEFAULT_MAX_UPLOAD,
            ttl: Duration::from_secs(3600),
            deadline: Duration::from_secs(5),
            beam_width: SearchConfig::default().beam_width,
            spill_dir: None,
            cors_origin: None,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<SessionStore>,
    pub config: Arc<ServiceConfig>,
    pub neural: Option<Arc<NeuralDecomposer>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> AppState {
        let store = SessionStore::new(config.ttl, config.spill_dir.clone());
        AppState { store: Arc::new(store), config: Arc::new(config), neural: None }
    }

    pub fn with_neural(mut self, n: NeuralDecomposer) -> AppState {
        self.neural = Some(Arc::new(n));
        self
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    BadRequest { message: String, row: Option<usize> },
    Unprocessable { message: String, reasons: Vec<String> },
    Timeout { deadline_ms: u128, tree: Option<DecompositionTree> },
    Internal(String),
}

impl ApiError {
    fn unprocessable(message: impl Into<String>) -> ApiError {
        let message = message.into();
        ApiError::Unprocessable { reasons: vec![message.clone()], message }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, json!({"error": m})),
            ApiError::BadRequest { message, row } => (StatusCode::BAD_REQUEST, json!({"error": message, "row": row})),
            ApiError::Unprocessable { message, reasons } => {
                (StatusCode::UNPROCESSABLE_ENTITY, json!({"error": message, "reasons": reasons}))
            }
            ApiError::Timeout { deadline_ms, tree } => (
                StatusCode::GATEWAY_TIMEOUT,
                json!({"error": "deadline exceeded", "deadline_ms": deadline_ms, "tree": tree}),
            ),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, json!({"error": m})),
        };
        (status, Json(body)).into_response()
    }
}

impl From<TableError> for ApiError {
    fn from(e: TableError) -> ApiError {
        let row = match &e {
            TableError::Ragged { row, .. } | TableError::Csv { row, .. } => Some(*row),
            _ => None,
        };
        ApiError::BadRequest { message: e.to_string(), row }
    }
}

impl From<AskError> for ApiError {
    fn from(e: AskError) -> ApiError {
        ApiError::Unprocessable { message: e.to_string(), reasons: e.reasons() }
    }
}

impl From<DecomposeError> for ApiError {
    fn from(e: DecomposeError) -> ApiError {
        AskError::Decompose(e).into()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn session(state: &AppState, id: &str) -> ApiResult<Session> {
    state.store.get(id).ok_or_else(|| ApiError::NotFound(format!("unknown or expired table '{id}'")))
}

#[derive(Clone)]
enum Backend {
    Rule,
    Neural(Arc<NeuralDecomposer>),
}

impl Backend {
    fn pick(state: &AppState, name: Option<&str>) -> ApiResult<Backend> {
        match name.unwrap_or("rule") {
            "rule" => Ok(Backend::Rule),
            "neural" => state
                .neural
                .clone()
                .map(Backend::Neural)
                .ok_or_else(|| ApiError::unprocessable("neural backend is not loaded")),
            other => Err(ApiError::unprocessable(format!("unknown backend '{other}'"))),
        }
    }

    fn as_dyn(&self) -> &dyn Decomposer {
        match self {
            Backend::Rule => &RuleDecomposer,
            Backend::Neural(n) => n.as_ref(),
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct UploadParams {
    pub name: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct UploadResponse {
    pub table_id: String,
    pub schema: tabqa_core::table::TableSchema,
}

async fn upload(State(state): State<AppState>, Query(p): Query<UploadParams>, body: Bytes) -> ApiResult<Json<UploadResponse>> {
    let name = p.name.unwrap_or_else(|| "table".to_string());
    let table = load_table(&body, &LoadOptions::named(name))?;
    let store = state.store.clone();
    let s = tokio::task::spawn_blocking(move || store.insert(table))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(|e| ApiError::Internal(format!("session spill failed: {e}")))?;
    tracing::info!(table_id = %s.table_id, rows = s.engine.table().row_count(), "table uploaded");
    Ok(Json(UploadResponse { table_id: s.table_id.clone(), schema: s.engine.table().schema() }))
}

async fn table_preview(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    let x = s.engine.table();
    let csv_text = x.to_csv();
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(csv_text.as_bytes());
    let rows: Vec<Vec<String>> = reader
        .records()
        .take(PREVIEW_ROWS)
        .filter_map(Result::ok)
        .map(|r| r.iter().map(str::to_string).collect())
        .collect();
    Ok(Json(json!({"table_id": id, "schema": x.schema(), "rows": rows})))
}

#[derive(Debug, Deserialize)]
pub struct SuggestParams {
    pub column: Option<String>,
}

async fn suggestions(State(state): State<AppState>, Path(id): Path<String>, Query(p): Query<SuggestParams>) -> ApiResult<Json<Vec<String>>> {
    let s = session(&state, &id)?;
    let column = p.column.as_deref().filter(|c| !c.is_empty());
    s.engine.suggestions(column).map(Json).map_err(|e| match e {
        SuggestError::UnknownColumn(_) => ApiError::unprocessable(e.to_string()),
    })
}

#[derive(Debug, Deserialize)]
pub struct AskRequest {
    pub question: String,
    pub beam_width: Option<usize>,
    pub backend: Option<String>,
}

async fn ask(State(state): State<AppState>, Path(id): Path<String>, Json(req): Json<AskRequest>) -> ApiResult<Response> {
    let s = session(&state, &id)?;
    let question = req.question.trim().to_string();
    if question.is_empty() {
        return Err(AskError::EmptyQuestion.into());
    }
    let beam = req.beam_width.unwrap_or(state.config.beam_width);
    if beam == 0 {
        return Err(ApiError::unprocessable("beam_width must be at least 1"));
    }
    let backend = Backend::pick(&state, req.backend.as_deref())?;
    let config = EngineConfig { search: SearchConfig { beam_width: beam, ..s.engine.config.search.clone() }, ..s.engine.config.clone() };
    let partial: Arc<Mutex<Option<DecompositionTree>>> = Arc::new(Mutex::new(None));
    let seen = partial.clone();
    let engine = s.engine.clone();
    let job = tokio::task::spawn_blocking(move || {
        let tree = engine.decompose_using(&question, &config, backend.as_dyn())?;
        *seen.lock().expect("partial lock") = Some(tree.clone());
        engine.answer_tree(&question, tree, &config)
    });
    let deadline = state.config.deadline;
    match tokio::time::timeout(deadline, job).await {
        Ok(Ok(Ok(r))) => Ok(Json(r).into_response()),
        Ok(Ok(Err(e))) => Err(e.into()),
        Ok(Err(e)) => Err(ApiError::Internal(e.to_string())),
        Err(_) => {
            let tree = partial.lock().expect("partial lock").clone();
            Err(ApiError::Timeout { deadline_ms: deadline.as_millis(), tree })
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct DecomposeRequest {
    pub table_id: String,
    pub question: String,
    pub backend: Option<String>,
}

async fn decompose(State(state): State<AppState>, Json(req): Json<DecomposeRequest>) -> ApiResult<Json<DecompositionTree>> {
    let s = session(&state, &req.table_id)?;
    let q = req.question.trim().to_string();
    if q.is_empty() {
        return Err(AskError::EmptyQuestion.into());
    }
    let backend = Backend::pick(&state, req.backend.as_deref())?;
    let engine = s.engine.clone();
    let tree = tokio::task::spawn_blocking(move || engine.decompose_using(&q, &engine.config, backend.as_dyn()))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(tree))
}

async fn health(State(state): State<AppState>) -> Json<Value> {
    let _ = state.store.len();
    Json(json!({"status": "ok", "version": VERSION}))
}

async fn schema_index() -> Json<Value> {
    Json(schema::index())
}

async fn schema_one(Path(name): Path<String>) -> ApiResult<Json<Value>> {
    schema::schema(&name).map(Json).ok_or_else(|| ApiError::NotFound(format!("unknown schema '{name}'")))
}

fn cors(origin: Option<&str>) -> CorsLayer {
    let layer = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    match origin.and_then(|o| HeaderValue::from_str(o).ok()) {
        Some(o) => layer.allow_origin(o),
        None => layer.allow_origin(Any),
    }
}

pub fn router(state: AppState) -> Router {
    let limit = state.config.max_upload;
    let cors = cors(state.config.cors_origin.as_deref());
    Router::new()
        .route("/api/health", get(health))
        .route("/api/schema", get(schema_index))
        .route("/api/schema/{name}", get(schema_one))
        .route("/api/tables", post(upload))
        .route("/api/tables/{id}", get(table_preview))
        .route("/api/tables/{id}/suggestions", get(suggestions))
        .route("/api/tables/{id}/ask", post(ask))
        .route("/api/decompose", post(decompose))
        .layer(DefaultBodyLimit::max(limit))
        .layer(cors)
        .with_state(state)
}

/// Serves until the process receives Ctrl-C, sweeping expired sessions once a minute.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    let store = state.store.clone();
    let sweeper = tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            let n = store.sweep();
            if n > 0 {
                tracing::info!(evicted = n, "expired sessions evicted");
            }
        }
    });
    tracing::info!(addr = ?listener.local_addr().ok(), "listening");
    let result = axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    sweeper.abort();
    result
}
