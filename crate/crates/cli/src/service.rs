//! Local JSON-over-HTTP service backing the explorer UI.
//!
//! The scene is one shared resource behind a read/write lock: traces clone
//! it under a read lock, `PUT /api/scene` replaces it under the write lock.
//! At most one optimize job runs at a time.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use catafinger::config::{locate, ConfigError, ConfigErrorKind, SceneConfig};
use catafinger::design_opt::{DesignObjective, HistoryRow};
use catafinger::geometry::Point2;
use catafinger::report::{terminal_class, TraceSummary};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::RwLock;

use crate::commands::{design_for, run_optimize_observed, trace_artifacts};

pub struct AppState {
    scene: RwLock<SceneConfig>,
    jobs: Mutex<Jobs>,
}

#[derive(Default)]
struct Jobs {
    next_id: u64,
    table: BTreeMap<u64, Job>,
}

impl Jobs {
    fn running(&self) -> Option<u64> {
        self.table.values().find(|j| j.status == JobStatus::Running).map(|j| j.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum JobStatus {
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
struct Job {
    id: u64,
    status: JobStatus,
    budget: usize,
    seed: u64,
    evaluations: usize,
    initial_score: Option<f64>,
    best_score: Option<f64>,
    history: Vec<HistoryRow>,
    best_scene: Option<SceneConfig>,
    error: Option<String>,
}

impl AppState {
    pub fn new(scene: SceneConfig) -> Arc<Self> {
        Arc::new(Self { scene: RwLock::new(scene), jobs: Mutex::new(Jobs::default()) })
    }
}

pub fn router(scene: SceneConfig) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/scene", get(get_scene).put(put_scene))
        .route("/api/trace", post(trace))
        .route("/api/optimize", post(start_optimize))
        .route("/api/optimize/{id}", get(poll_optimize))
        .with_state(AppState::new(scene))
}

/// Bind `addr` and serve until Ctrl-C.
pub async fn serve(scene: SceneConfig, addr: SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(scene))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    column: Option<usize>,
}

struct ApiError(StatusCode, ErrorBody);

impl ApiError {
    fn new(status: StatusCode, error: impl Into<String>) -> Self {
        Self(status, ErrorBody { error: error.into(), field: None, line: None, column: None })
    }

    fn config(err: ConfigError) -> Self {
        let status = match err.kind {
            ConfigErrorKind::Syntax => StatusCode::BAD_REQUEST,
            ConfigErrorKind::UnknownKey | ConfigErrorKind::Invalid => StatusCode::UNPROCESSABLE_ENTITY,
        };
        let field = err.field.clone().or_else(|| unknown_field(&err.message));
        Self(status, ErrorBody { error: err.to_string(), field, line: err.line, column: err.column })
    }

    fn json(err: serde_json::Error) -> Self {
        let status = match err.classify() {
            serde_json::error::Category::Data => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::BAD_REQUEST,
        };
        let message = err.to_string();
        Self(
            status,
            ErrorBody {
                field: unknown_field(&message),
                error: message,
                line: Some(err.line()),
                column: Some(err.column()),
            },
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

fn unknown_field(message: &str) -> Option<String> {
    let rest = message.split_once("unknown field `")?.1;
    Some(rest.split_once('`')?.0.to_string())
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "name": "catafinger", "version": env!("CARGO_PKG_VERSION") }))
}

async fn get_scene(State(state): State<Arc<AppState>>) -> Json<SceneConfig> {
    Json(state.scene.read().await.clone())
}

/// Accepts the scene as JSON, or as the TOML file dialect when sent with a
/// TOML content type.
async fn put_scene(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<SceneConfig>, ApiError> {
    let is_toml = headers.get(header::CONTENT_TYPE).and_then(|v| v.to_str().ok()).is_some_and(|v| v.contains("toml"));
    let config = if is_toml {
        let text =
            std::str::from_utf8(&body).map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "body is not UTF-8"))?;
        let config = SceneConfig::parse(text).map_err(ApiError::config)?;
        config.validate().map_err(|e| ApiError::config(locate(e, text)))?;
        config
    } else {
        let config: SceneConfig = serde_json::from_slice(&body).map_err(ApiError::json)?;
        config.validate().map_err(ApiError::config)?;
        config
    };
    *state.scene.write().await = config.clone();
    Ok(Json(config))
}

#[derive(Debug, Serialize)]
struct RayBody {
    pixel_index: usize,
    terminal: &'static str,
    points: Vec<[f64; 2]>,
}

#[derive(Debug, Serialize)]
struct TraceBody {
    summary: TraceSummary,
    /// Byte-identical to the `.metrics.tsv` file `trace` writes.
    metrics_tsv: String,
    rays: Vec<RayBody>,
}

async fn trace(State(state): State<Arc<AppState>>) -> Result<Json<TraceBody>, ApiError> {
    let config = state.scene.read().await.clone();
    let art = tokio::task::spawn_blocking(move || trace_artifacts(&config))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("{e:#}")))?;
    let rays = art
        .report
        .traces
        .iter()
        .zip(art.report.ray_polylines())
        .map(|(t, pts)| RayBody {
            pixel_index: t.pixel_index,
            terminal: terminal_class(&t.terminal),
            points: pts.iter().map(|p: &Point2| [p.x, p.y]).collect(),
        })
        .collect();
    Ok(Json(TraceBody { summary: art.report.summary.clone(), metrics_tsv: art.metrics_tsv, rays }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizeRequest {
    budget: usize,
    #[serde(default)]
    seed: u64,
    /// Trace at this many pixels during the search.
    pixel_count: Option<usize>,
}

async fn start_optimize(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: OptimizeRequest = serde_json::from_slice(&body).map_err(ApiError::json)?;
    if req.pixel_count.is_some_and(|n| n < 2) {
        let mut err = ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "pixel_count must be at least 2");
        err.1.field = Some("pixel_count".into());
        return Err(err);
    }
    let config = state.scene.read().await.clone();
    design_for(&config, req.budget).map_err(|e| {
        let mut err = ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("{e:#}"));
        err.1.field = Some("budget".into());
        err
    })?;
    let objective = DesignObjective { pixel_count: req.pixel_count, ..DesignObjective::default() };

    let id = {
        let mut jobs = state.jobs.lock().expect("job table lock");
        if let Some(running) = jobs.running() {
            return Err(ApiError::new(StatusCode::CONFLICT, format!("optimize job {running} is still running")));
        }
        jobs.next_id += 1;
        let id = jobs.next_id;
        jobs.table.insert(
            id,
            Job {
                id,
                status: JobStatus::Running,
                budget: req.budget,
                seed: req.seed,
                evaluations: 0,
                initial_score: None,
                best_score: None,
                history: Vec::new(),
                best_scene: None,
                error: None,
            },
        );
        id
    };

    let worker = Arc::clone(&state);
    tokio::task::spawn_blocking(move || {
        let outcome = run_optimize_observed(&config, &objective, req.budget, req.seed, |row| {
            let mut jobs = worker.jobs.lock().expect("job table lock");
            if let Some(job) = jobs.table.get_mut(&id) {
                job.initial_score.get_or_insert(row.result.score);
                job.best_score = Some(row.best_so_far);
                job.evaluations = row.evaluation;
                job.history.push(row.clone());
            }
        });
        let mut jobs = worker.jobs.lock().expect("job table lock");
        if let Some(job) = jobs.table.get_mut(&id) {
            match outcome {
                Ok(run) => {
                    job.status = JobStatus::Done;
                    job.initial_score = Some(run.initial_score);
                    job.best_score = Some(run.final_score());
                    job.evaluations = run.result.history.len();
                    job.history = run.result.history;
                    job.best_scene = Some(run.best_scene);
                }
                Err(e) => {
                    job.status = JobStatus::Failed;
                    job.error = Some(format!("{e:#}"));
                }
            }
        }
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "id": id, "status": JobStatus::Running }))).into_response())
}

async fn poll_optimize(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> Result<Json<Job>, ApiError> {
    let jobs = state.jobs.lock().expect("job table lock");
    jobs.table
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no optimize job {id}")))
}
