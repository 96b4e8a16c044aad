//! HTTP API over the run store and live sessions.
//!
//! Session updates are pushed on `GET /sessions/{id}/events` as
//! server-sent events; actions go in through `POST` requests.

use std::collections::HashMap;
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::broadcast;
use tokio_stream::wrappers::BroadcastStream;
use tokio_stream::{Stream, StreamExt};

use duet_core::orchestrator::{Mode, RunConfig};
use duet_core::store::{parse_trajectory_lenient, SessionError, SessionManager, SessionState, StepOutcome, Store};
use duet_core::tasks::CompositeTask;
use duet_core::telecom::Telecom;
use duet_core::world::{Action, PlayerId};

use crate::commands::task_summary;

/// One message on a session's event stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionUpdate {
    /// Sent first on every subscription.
    Snapshot { state: SessionState },
    /// New visible events and the resulting state.
    Step { outcome: StepOutcome },
    /// A fork of this session was created.
    Branch { state: SessionState },
}

impl SessionUpdate {
    fn name(&self) -> &'static str {
        match self {
            SessionUpdate::Snapshot { .. } => "snapshot",
            SessionUpdate::Step { .. } => "step",
            SessionUpdate::Branch { .. } => "branch",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct StartRequest {
    pub task_id: String,
    #[serde(default)]
    pub mode: Mode,
    pub human_role: PlayerId,
    /// When false the scripted side waits for `POST /sessions/{id}/step`.
    #[serde(default = "yes")]
    pub autoplay: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
pub struct ActRequest {
    pub action: Action,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RewindRequest {
    pub event_index: usize,
    #[serde(default)]
    pub replacement: Option<Action>,
    #[serde(default)]
    pub note: String,
}

pub struct AppState {
    store: Store,
    sessions: Mutex<SessionManager<Telecom>>,
    channels: Mutex<HashMap<String, broadcast::Sender<SessionUpdate>>>,
    tasks: Vec<CompositeTask>,
}

impl AppState {
    pub fn new(store_root: PathBuf, tasks: Vec<CompositeTask>, config: RunConfig) -> Self {
        let store = Store::new(store_root);
        let sessions = SessionManager::new(Telecom::shared(), tasks.clone(), config).with_checkpoints(store.sessions_dir());
        AppState {
            store,
            sessions: Mutex::new(sessions),
            channels: Mutex::new(HashMap::new()),
            tasks,
        }
    }

    fn channel(&self, id: &str) -> broadcast::Sender<SessionUpdate> {
        self.channels
            .lock()
            .expect("channel map lock")
            .entry(id.to_string())
            .or_insert_with(|| broadcast::channel(64).0)
            .clone()
    }

    fn publish(&self, id: &str, update: SessionUpdate) {
        // no subscribers is fine
        let _ = self.channel(id).send(update);
    }
}

pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            kind,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "kind": self.kind, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, kind) = match &e {
            SessionError::NotFound(_) | SessionError::UnknownTask(_) => (StatusCode::NOT_FOUND, "not_found"),
            SessionError::NotYourTurn => (StatusCode::CONFLICT, "not_your_turn"),
            SessionError::Finished => (StatusCode::CONFLICT, "finished"),
            SessionError::Invalid(_) => (StatusCode::BAD_REQUEST, "invalid"),
            SessionError::Sim(_) => (StatusCode::UNPROCESSABLE_ENTITY, "simulation"),
            SessionError::Checkpoint(_) => (StatusCode::INTERNAL_SERVER_ERROR, "checkpoint"),
        };
        ApiError::new(status, kind, e.to_string())
    }
}

impl From<duet_core::store::StoreError> for ApiError {
    fn from(e: duet_core::store::StoreError) -> Self {
        use duet_core::store::StoreError;
        let status = match &e {
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, if status == StatusCode::NOT_FOUND { "not_found" } else { "store" }, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid", e.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;
type Body<T> = Result<Json<T>, JsonRejection>;
type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/runs", get(list_runs))
        .route("/runs/{run_id}", get(get_run))
        .route("/runs/{run_id}/trajectories/{file}", get(get_trajectory))
        .route("/tasks", get(list_tasks))
        .route("/tasks/{task_id}", get(get_task))
        .route("/sessions", get(list_sessions).post(start_session))
        .route("/sessions/{id}", get(session_state))
        .route("/sessions/{id}/actions", post(post_action))
        .route("/sessions/{id}/step", post(step_bot))
        .route("/sessions/{id}/rewind", post(rewind))
        .route("/sessions/{id}/events", get(session_events))
        .with_state(state)
}

async fn list_runs(State(s): State<Shared>) -> ApiResult<Json<Value>> {
    Ok(Json(json!(s.store.list_runs()?)))
}

async fn get_run(State(s): State<Shared>, Path(run_id): Path<String>) -> ApiResult<Json<Value>> {
    let run = s.store.open_run(&run_id)?;
    let files: Vec<String> = run
        .trajectory_files()?
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    let results = run.read_results().ok();
    Ok(Json(json!({
        "manifest": run.manifest,
        "summary": run.read_summary().ok(),
        "results": results,
        "trajectories": files,
    })))
}

async fn get_trajectory(State(s): State<Shared>, Path((run_id, file)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    let run = s.store.open_run(&run_id)?;
    let path = run.trajectory_path(&file)?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store", e.to_string()))?;
    Ok(Json(json!(parse_trajectory_lenient(&text))))
}

async fn list_tasks(State(s): State<Shared>) -> Json<Value> {
    Json(json!(s.tasks.iter().map(task_summary).collect::<Vec<_>>()))
}

async fn get_task(State(s): State<Shared>, Path(task_id): Path<String>) -> ApiResult<Json<CompositeTask>> {
    s.tasks
        .iter()
        .find(|t| t.id == task_id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("unknown task '{task_id}'")))
}

async fn list_sessions(State(s): State<Shared>) -> Json<Value> {
    Json(json!(s.sessions.lock().expect("session lock").list()))
}

async fn start_session(State(s): State<Shared>, req: Body<StartRequest>) -> ApiResult<(StatusCode, Json<SessionState>)> {
    let Json(req) = req?;
    let state = s
        .sessions
        .lock()
        .expect("session lock")
        .start_with(&req.task_id, req.mode, req.human_role, req.autoplay)?;
    Ok((StatusCode::CREATED, Json(state)))
}

async fn session_state(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<SessionState>> {
    Ok(Json(s.sessions.lock().expect("session lock").state(&id)?))
}

async fn post_action(
    State(s): State<Shared>,
    Path(id): Path<String>,
    req: Body<ActRequest>,
) -> ApiResult<Json<StepOutcome>> {
    let Json(req) = req?;
    let outcome = s.sessions.lock().expect("session lock").act(&id, req.action)?;
    s.publish(&id, SessionUpdate::Step { outcome: outcome.clone() });
    Ok(Json(outcome))
}

async fn step_bot(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<StepOutcome>> {
    let outcome = s.sessions.lock().expect("session lock").step_bot(&id)?;
    s.publish(&id, SessionUpdate::Step { outcome: outcome.clone() });
    Ok(Json(outcome))
}

async fn rewind(
    State(s): State<Shared>,
    Path(id): Path<String>,
    req: Body<RewindRequest>,
) -> ApiResult<(StatusCode, Json<SessionState>)> {
    let Json(req) = req?;
    let state = s
        .sessions
        .lock()
        .expect("session lock")
        .rewind(&id, req.event_index, req.replacement, &req.note)?;
    s.publish(&id, SessionUpdate::Branch { state: state.clone() });
    Ok((StatusCode::CREATED, Json(state)))
}

async fn session_events(
    State(s): State<Shared>,
    Path(id): Path<String>,
) -> ApiResult<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>> {
    let snapshot = s.sessions.lock().expect("session lock").state(&id)?;
    let rx = s.channel(&id).subscribe();
    let first = tokio_stream::once(SessionUpdate::Snapshot { state: snapshot });
    // a lagging subscriber skips what it missed; the next update carries full state
    let rest = BroadcastStream::new(rx).filter_map(Result::ok);
    let stream = first.chain(rest).map(|u| {
        Ok(SseEvent::default()
            .event(u.name())
            .data(serde_json::to_string(&u).expect("update serializes")))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

pub async fn serve(state: Shared, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
