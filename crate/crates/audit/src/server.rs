//! HTTP API over persisted sessions.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use causal_audit_core::chart::palette::Palette;
use causal_audit_core::chart::{render_svg, Dims};
use causal_audit_core::{Combo, EnvironmentOptions, GraphError, Refinement};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use crate::gateway::Gateway;
use crate::session::{AuditSession, ChartKind, SessionDir, SessionError, SessionOptions};

pub struct AppState {
    pub data_dir: PathBuf,
    pub gateway: Arc<Gateway>,
    pub parallelism: usize,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl AppState {
    pub fn new(data_dir: &Path, gateway: Arc<Gateway>, parallelism: usize) -> Self {
        AppState { data_dir: data_dir.to_path_buf(), gateway, parallelism: parallelism.max(1), locks: Mutex::default() }
    }

    fn lock_for(&self, id: &str) -> Arc<Mutex<()>> {
        self.locks.lock().expect("lock table").entry(id.to_string()).or_default().clone()
    }

    fn dir(&self, id: &str) -> Result<SessionDir, ApiError> {
        let valid = !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-');
        let dir = SessionDir::new(self.data_dir.join(id));
        if valid && dir.exists() {
            Ok(dir)
        } else {
            Err(ApiError::new(StatusCode::NOT_FOUND, "no_such_session", format!("no session {id:?}")))
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    detail: Option<serde_json::Value>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: String) -> Self {
        ApiError { status, code, message, detail: None }
    }

    fn bad_request(message: String) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "validation", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        use SessionError::*;
        let (status, code) = match &e {
            Graph(GraphError::NoSuchVariable(_)) => (StatusCode::NOT_FOUND, "no_such_variable"),
            NoSuchVersion(_) => (StatusCode::NOT_FOUND, "no_such_version"),
            NoSuchAudit(_) => (StatusCode::NOT_FOUND, "no_such_audit"),
            VersionConflict { .. } => (StatusCode::CONFLICT, "version_conflict"),
            Gateway(_) => (StatusCode::BAD_GATEWAY, "gateway"),
            IncompleteBattery { .. } => (StatusCode::BAD_GATEWAY, "incomplete_battery"),
            Io { .. } | Corrupt(_) | FingerprintMismatch { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "storage"),
            _ => (StatusCode::BAD_REQUEST, "validation"),
        };
        let detail = match &e {
            Gateway(g) => serde_json::to_value(g).ok(),
            IncompleteBattery { failures, .. } => serde_json::to_value(failures).ok(),
            VersionConflict { expected, current } => Some(json!({"expected": expected, "current": current})),
            _ => None,
        };
        ApiError { status, code, message: e.to_string(), detail }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"error": self.code, "message": self.message});
        if let Some(d) = self.detail {
            body["detail"] = d;
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;
type Shared = State<Arc<AppState>>;

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", format!("worker failed: {e}"))
    })?
}

/// Loads, mutates and saves one session under its write lock.
async fn mutate<T: Send + 'static>(
    state: Arc<AppState>,
    id: String,
    f: impl FnOnce(&mut AuditSession, &causal_audit_core::Dataset, &AppState) -> Result<T, SessionError> + Send + 'static,
) -> ApiResult<T> {
    blocking(move || {
        let dir = state.dir(&id)?;
        let lock = state.lock_for(&id);
        let _guard = lock.lock().expect("session lock");
        let (mut session, data) = dir.load()?;
        let out = f(&mut session, &data, &state)?;
        dir.save(&session)?;
        Ok(out)
    })
    .await
}

async fn read(state: Arc<AppState>, id: String) -> ApiResult<AuditSession> {
    blocking(move || Ok(state.dir(&id)?.load()?.0)).await
}

#[derive(Deserialize)]
struct CreateQuery {
    alpha: Option<f64>,
    /// Comma-separated column names.
    columns: Option<String>,
}

#[derive(Deserialize)]
struct CreateBody {
    csv: String,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    columns: Option<Vec<String>>,
    #[serde(default)]
    max_condition_size: Option<usize>,
}

async fn create(State(state): Shared, Query(q): Query<CreateQuery>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let is_json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"));
    let (csv, options) = if is_json {
        let b: CreateBody = parse_body(&body)?;
        let options = SessionOptions {
            alpha: b.alpha.unwrap_or(0.05),
            columns: b.columns,
            max_condition_size: b.max_condition_size,
            id: None,
        };
        (b.csv.into_bytes(), options)
    } else {
        let columns = q.columns.map(|c| c.split(',').map(|s| s.trim().to_string()).collect());
        (body.to_vec(), SessionOptions { alpha: q.alpha.unwrap_or(0.05), columns, ..SessionOptions::default() })
    };
    let session = blocking(move || {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let options = SessionOptions { id: Some(id.clone()), ..options };
        let dir = SessionDir::new(state.data_dir.join(&id));
        match dir.create(&csv, &options) {
            Ok((session, _)) => Ok(session),
            Err(e) => {
                let _ = std::fs::remove_dir_all(&dir.path);
                Err(e.into())
            }
        }
    })
    .await?;
    let body = json!({
        "id": session.id,
        "current_version": session.current_version(),
        "bic_total": session.bic_report(0).map(|b| b.total).ok(),
    });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn get_session(State(state): Shared, UrlPath(id): UrlPath<String>) -> ApiResult<Json<AuditSession>> {
    Ok(Json(read(state, id).await?))
}

#[derive(Deserialize)]
struct VersionQuery {
    version: Option<u64>,
}

async fn get_graph(State(state): Shared, UrlPath(id): UrlPath<String>, Query(q): Query<VersionQuery>) -> ApiResult<Response> {
    let s = read(state, id).await?;
    let g = s.graph(q.version.unwrap_or(s.current_version()))?;
    Ok(Json(g).into_response())
}

async fn get_bic(State(state): Shared, UrlPath(id): UrlPath<String>, Query(q): Query<VersionQuery>) -> ApiResult<Response> {
    let s = read(state, id).await?;
    let r = s.bic_report(q.version.unwrap_or(s.current_version()))?;
    Ok(Json(r).into_response())
}

#[derive(Deserialize)]
struct DebateBody {
    a: String,
    b: String,
}

async fn audit_debate(State(state): Shared, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<Response> {
    let req: DebateBody = parse_body(&body)?;
    let result = mutate(state, id, move |s, _, st| s.audit_edge(&st.gateway, &req.a, &req.b, st.parallelism)).await?;
    Ok(Json(result).into_response())
}

#[derive(Deserialize)]
struct EnvironmentBody {
    cause: String,
    effect: String,
    #[serde(default)]
    combos: Vec<Combo>,
    #[serde(default)]
    unit: Option<String>,
    #[serde(default)]
    structured: bool,
}

async fn audit_environment(State(state): Shared, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<Response> {
    let req: EnvironmentBody = parse_body(&body)?;
    let mut options = EnvironmentOptions { structured_suffix: req.structured, ..EnvironmentOptions::default() };
    if let Some(u) = req.unit {
        options.unit = u;
    }
    let result = mutate(state, id, move |s, _, st| {
        s.audit_environment(&st.gateway, &req.cause, &req.effect, &req.combos, &options, st.parallelism)
    })
    .await?;
    Ok(Json(result).into_response())
}

#[derive(Deserialize)]
struct RefinementBody {
    refinement: Refinement,
    expected_version: Option<u64>,
}

async fn refine(State(state): Shared, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<Response> {
    let req: RefinementBody = parse_body(&body)?;
    let outcome =
        mutate(state, id, move |s, data, _| s.apply_refinement(data, &req.refinement, req.expected_version)).await?;
    Ok(Json(outcome).into_response())
}

#[derive(Deserialize)]
struct ChartQuery {
    a: String,
    b: String,
    combo: Option<Combo>,
    #[serde(default)]
    format: Option<String>,
    width: Option<i64>,
    height: Option<i64>,
}

async fn chart(
    State(state): Shared,
    UrlPath((id, kind)): UrlPath<(String, String)>,
    Query(q): Query<ChartQuery>,
) -> ApiResult<Response> {
    let kind: ChartKind = kind.parse().map_err(ApiError::bad_request)?;
    let s = read(state, id).await?;
    let data = s.chart(kind, &q.a, &q.b, q.combo)?;
    match q.format.as_deref() {
        None | Some("json") | Some("chart-data") => Ok(Json(data).into_response()),
        Some("svg") => {
            let d = Dims::default();
            let dims = Dims { width: q.width.unwrap_or(d.width), height: q.height.unwrap_or(d.height) };
            let svg = render_svg(&data, dims).map_err(|e| ApiError::from(SessionError::from(e)))?;
            Ok(([(header::CONTENT_TYPE, "image/svg+xml")], svg).into_response())
        }
        Some(other) => Err(ApiError::bad_request(format!("unknown format {other:?} (json, svg)"))),
    }
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    backend: crate::gateway::BackendKind,
    model: String,
}

async fn healthz(State(state): Shared) -> Json<Health> {
    Json(Health { status: "ok", backend: state.gateway.backend_kind(), model: state.gateway.model().to_string() })
}

async fn palette() -> Json<Palette> {
    Json(Palette::standard())
}

pub fn router(state: Arc<AppState>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/healthz", get(healthz))
        .route("/palette", get(palette))
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/graph", get(get_graph))
        .route("/sessions/{id}/bic", get(get_bic))
        .route("/sessions/{id}/audit/debate", post(audit_debate))
        .route("/sessions/{id}/audit/environment", post(audit_environment))
        .route("/sessions/{id}/charts/{kind}", get(chart))
        .route("/sessions/{id}/refinements", post(refine))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until interrupted.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    std::fs::create_dir_all(&state.data_dir)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, static_dir.as_deref()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
