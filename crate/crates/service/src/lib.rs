//! HTTP front-end for an annotation session: browse examples, preview and
//! commit explanations, trigger pipeline runs.

mod error;
mod session;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::Json;
pub use axum::Router;
use babble::corpus::{Example, Explanation};
use babble::pipeline::{run_on, Inputs, PipelineConfig, RunReport};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

pub use error::{ApiError, ErrorBody};
pub use session::{CandidateView, Committed, Draft, Preview, Session, SessionError};

const DEFAULT_PAGE: usize = 50;
const MAX_PAGE: usize = 1000;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub pipeline: PipelineConfig,
    /// Directory of static workbench assets served at `/`.
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunStatus {
    /// Sequence number of the run, starting at 1.
    pub run: u64,
    /// Session revision the run was started from.
    pub started_at_revision: u64,
    pub state: RunState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<RunReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

#[derive(Default)]
struct RunSlot {
    latest: Option<RunStatus>,
    last_report: Option<RunReport>,
}

/// Shared state behind the router. Reads take the session lock shared;
/// commits and run completions take it exclusively.
#[derive(Clone)]
pub struct AppState {
    session: Arc<RwLock<Session>>,
    runs: Arc<Mutex<RunSlot>>,
}

impl AppState {
    pub fn new(session: Session) -> Self {
        AppState {
            session: Arc::new(RwLock::new(session)),
            runs: Arc::new(Mutex::new(RunSlot::default())),
        }
    }

    pub fn revision(&self) -> u64 {
        self.session.read().expect("session lock").revision()
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

fn session_error(e: SessionError) -> ApiError {
    match e {
        SessionError::UnknownExample(id) => ApiError::not_found("example", &id),
        SessionError::EmptyText => ApiError::bad_request("explanation text is empty"),
        SessionError::Rejected(preview) => ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "rejected",
            "no candidate survives the filter bank",
        )
        .with_detail(&*preview),
        SessionError::Pipeline(e) => e.into(),
    }
}

fn json_body<T>(body: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    body.map(|Json(b)| b).map_err(|e| ApiError::bad_request(e.body_text()))
}

#[derive(Debug, Deserialize)]
struct Page {
    offset: Option<usize>,
    limit: Option<usize>,
}

#[derive(Debug, Serialize)]
struct ExamplePage {
    total: usize,
    offset: usize,
    items: Vec<Example>,
}

async fn list_examples(
    State(state): State<AppState>,
    page: Result<Query<Page>, QueryRejection>,
) -> Result<Json<ExamplePage>, ApiError> {
    let Query(page) = page.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let limit = page.limit.unwrap_or(DEFAULT_PAGE);
    if limit > MAX_PAGE {
        return Err(ApiError::bad_request(format!("limit {limit} exceeds {MAX_PAGE}")));
    }
    let session = state.session.read().expect("session lock");
    let pool = session.pool();
    let offset = page.offset.unwrap_or(0).min(pool.len());
    let end = (offset + limit).min(pool.len());
    Ok(Json(ExamplePage {
        total: pool.len(),
        offset,
        items: pool[offset..end].to_vec(),
    }))
}

async fn get_example(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Example>, ApiError> {
    let session = state.session.read().expect("session lock");
    session
        .example(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found("example", &id))
}

async fn preview(
    State(state): State<AppState>,
    body: Result<Json<Draft>, JsonRejection>,
) -> Result<Json<Preview>, ApiError> {
    let draft = json_body(body)?;
    let session = state.session.clone();
    blocking(move || {
        let session = session.read().expect("session lock");
        session.preview(&draft).map_err(session_error)
    })
    .await
    .map(Json)
}

async fn commit(
    State(state): State<AppState>,
    body: Result<Json<Draft>, JsonRejection>,
) -> Result<(StatusCode, Json<Committed>), ApiError> {
    let draft = json_body(body)?;
    let session = state.session.clone();
    blocking(move || {
        let mut session = session.write().expect("session lock");
        session.commit(&draft).map_err(session_error)
    })
    .await
    .map(|c| (StatusCode::CREATED, Json(c)))
}

#[derive(Debug, Serialize)]
struct ExplanationList {
    revision: u64,
    explanations: Vec<Explanation>,
}

async fn list_explanations(State(state): State<AppState>) -> Json<ExplanationList> {
    let session = state.session.read().expect("session lock");
    Json(ExplanationList {
        revision: session.revision(),
        explanations: session.explanations(),
    })
}

#[derive(Debug, Serialize)]
struct RunAccepted {
    run: u64,
    revision: u64,
}

async fn trigger_run(State(state): State<AppState>) -> Result<(StatusCode, Json<RunAccepted>), ApiError> {
    let (config, revision) = {
        let session = state.session.read().expect("session lock");
        if session.labeled().is_empty() {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "no_explanations",
                "commit at least one explanation before running",
            ));
        }
        (session.config().clone(), session.revision())
    };
    let run = {
        let mut slot = state.runs.lock().expect("run lock");
        if let Some(status) = slot.latest.as_ref().filter(|s| s.state == RunState::Running) {
            return Err(ApiError::new(StatusCode::CONFLICT, "run_in_progress", "a run is already in progress")
                .with_detail(status));
        }
        let run = slot.latest.as_ref().map_or(1, |s| s.run + 1);
        slot.latest = Some(RunStatus {
            run,
            started_at_revision: revision,
            state: RunState::Running,
            report: None,
            error: None,
        });
        run
    };
    let task_state = state.clone();
    tokio::task::spawn_blocking(move || {
        // Files are read under the session lock so a concurrent commit cannot
        // append half a line mid-read.
        let inputs = {
            let _guard = task_state.session.read().expect("session lock");
            Inputs::load(&config)
        };
        let outcome = inputs.and_then(|inputs| run_on(&inputs, &config, &[], Some(&config.out_dir)));
        task_state.session.write().expect("session lock").bump();
        let mut slot = task_state.runs.lock().expect("run lock");
        let status = slot.latest.as_mut().expect("run registered");
        match outcome {
            Ok(report) => {
                status.state = RunState::Succeeded;
                status.report = Some(report.clone());
                slot.last_report = Some(report);
            }
            Err(e) => {
                status.state = RunState::Failed;
                status.error = Some(ApiError::from(e).body);
            }
        }
    });
    Ok((StatusCode::ACCEPTED, Json(RunAccepted { run, revision })))
}

async fn latest_run(State(state): State<AppState>) -> Result<Json<RunStatus>, ApiError> {
    let slot = state.runs.lock().expect("run lock");
    slot.latest
        .clone()
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "no_run", "no run has been triggered"))
}

async fn report(State(state): State<AppState>) -> Result<Json<RunReport>, ApiError> {
    let slot = state.runs.lock().expect("run lock");
    slot.last_report
        .clone()
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "no_report", "no run has completed"))
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/examples", get(list_examples))
        .route("/examples/{id}", get(get_example))
        .route("/explanations/preview", post(preview))
        .route("/explanations", get(list_explanations).post(commit))
        .route("/run", post(trigger_run))
        .route("/run/latest", get(latest_run))
        .route("/report", get(report))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Opens the session and builds the router.
pub fn app(config: ServiceConfig) -> babble::Result<Router> {
    let session = Session::open(config.pipeline)?;
    Ok(router(AppState::new(session), config.static_dir))
}

pub async fn serve(app: Router, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app).await
}
