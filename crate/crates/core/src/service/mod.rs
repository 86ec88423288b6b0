//! HTTP annotation service.
//!
//! | route | |
//! |---|---|
//! | `POST /sessions` | open a session, 201 |
//! | `GET /sessions/{id}` | session handle |
//! | `GET /sessions/{id}/display` | pending display, 409 once finished |
//! | `POST /sessions/{id}/labels` | answer the pending display |
//! | `GET /sessions/{id}/metrics` | per-iteration records |
//! | `GET /patches/{sample_id}/{side}` | PNG, side is `ref` or `test` |
//! | `GET /datasets` | registered dataset names |
//!
//! Errors are JSON `{code, message, field?}`. Each session keeps a JSONL
//! event log in the state directory; [`AppState::open`] replays them.

mod events;
mod registry;

use std::collections::{HashMap, HashSet};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

pub use events::{Event, SessionSpec};
pub use registry::{DatasetEntry, DatasetRegistry};

use crate::error::{Error, ErrorKind, Result};
use crate::model::{Hyperparams, Label};
use crate::samplers::SamplerKind;
use crate::session::{
    init_session, stratified_split, EvalSet, IterationRecord, OracleBinding, Session,
};

/// JSON error body with its status.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            field: None,
        }
    }

    fn not_found(what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("{what} not found"))
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_labels", message)
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let message = err.to_string();
        match (&err, err.kind()) {
            (Error::Config { field, .. }, _) => Self {
                field: Some((*field).to_owned()),
                ..Self::new(StatusCode::BAD_REQUEST, "invalid_hyperparameter", message)
            },
            (_, ErrorKind::Config) => Self::new(StatusCode::BAD_REQUEST, "invalid_argument", message),
            (_, ErrorKind::State) => Self::conflict(message),
            (_, ErrorKind::Numeric) => {
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "numeric_failure", message)
            }
            (_, ErrorKind::Data) => {
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "data_error", message)
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    pub dataset: String,
    #[serde(default)]
    pub hyperparams: Option<Hyperparams>,
    #[serde(default)]
    pub strategy: Option<SamplerKind>,
    /// Hold out half of a fully labeled pool to report EER.
    #[serde(default)]
    pub eval_split: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHandle {
    pub session_id: String,
    /// Unix seconds.
    pub created_at: u64,
    pub dataset: String,
    pub strategy: SamplerKind,
    pub hyperparams: Hyperparams,
    pub n_train: usize,
    pub has_eval: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplayItem {
    pub sample_id: String,
    pub reference: Option<String>,
    pub test: Option<String>,
    /// Normalized score of the current model, once one exists.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplayResponse {
    pub session_id: String,
    pub t: usize,
    pub items: Vec<DisplayItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAnswer {
    pub sample_id: String,
    pub label: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitRequest {
    pub labels: Vec<LabelAnswer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsResponse {
    pub session_id: String,
    pub strategy: SamplerKind,
    pub t: usize,
    pub n_train: usize,
    pub finished: bool,
    pub records: Vec<IterationRecord>,
}

struct SessionSlot {
    handle: SessionHandle,
    current: RwLock<Session>,
    submit: tokio::sync::Mutex<()>,
    log: Option<PathBuf>,
}

impl SessionSlot {
    fn snapshot(&self) -> Session {
        self.current.read().unwrap_or_else(|p| p.into_inner()).clone()
    }
}

struct Inner {
    registry: DatasetRegistry,
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
    state_dir: Option<PathBuf>,
}

/// Shared service state; cheap to clone.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Builds the state and replays every event log found in `state_dir`.
    /// Blocking; call before serving.
    pub fn open(registry: DatasetRegistry, state_dir: Option<PathBuf>) -> Result<Self> {
        if let Some(dir) = &state_dir {
            std::fs::create_dir_all(dir)
                .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        }
        let state = AppState(Arc::new(Inner {
            registry,
            sessions: RwLock::new(HashMap::new()),
            state_dir,
        }));
        state.replay_all()?;
        Ok(state)
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions().keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Current snapshot of a session.
    pub fn session(&self, id: &str) -> Option<Session> {
        self.slot(id).map(|s| s.snapshot())
    }

    fn sessions(&self) -> std::sync::RwLockReadGuard<'_, HashMap<String, Arc<SessionSlot>>> {
        self.0.sessions.read().unwrap_or_else(|p| p.into_inner())
    }

    fn slot(&self, id: &str) -> Option<Arc<SessionSlot>> {
        self.sessions().get(id).cloned()
    }

    fn replay_all(&self) -> Result<()> {
        let Some(dir) = &self.0.state_dir else {
            return Ok(());
        };
        let mut logs: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(format!("listing {}", dir.display()), e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        logs.sort();
        for path in logs {
            match self.replay_one(&path) {
                Ok(id) => tracing::info!(%id, "replayed session"),
                Err(e) => tracing::warn!(path = %path.display(), "skipping log: {e}"),
            }
        }
        Ok(())
    }

    fn replay_one(&self, path: &std::path::Path) -> Result<String> {
        let events = events::read(path)?;
        let mut iter = events.into_iter();
        let Some(Event::Created {
            session_id,
            created_at,
            spec,
        }) = iter.next()
        else {
            return Err(Error::Format("log does not start with a created event".into()));
        };
        let (mut session, handle) = self.build_session(session_id.clone(), created_at, &spec)?;
        for event in iter {
            match event {
                Event::Labeled { t, answers } => {
                    if t != session.state().t {
                        return Err(Error::Format(format!(
                            "labeled event for display {t} at display {}",
                            session.state().t
                        )));
                    }
                    let answers = answers
                        .iter()
                        .map(|(id, y)| {
                            let i = session.context().dataset.index_of(id).ok_or_else(|| {
                                Error::Format(format!("unknown sample {id:?} in log"))
                            })?;
                            let label = Label::from_i64(i64::from(*y))
                                .ok_or_else(|| Error::Format(format!("label {y} in log")))?;
                            Ok((i, label))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    session = session.submit_labels(&answers)?;
                }
                Event::Advanced { t } => {
                    if t != session.state().t {
                        return Err(Error::Format(format!(
                            "log says display {t}, replay reached {}",
                            session.state().t
                        )));
                    }
                }
                Event::Created { .. } => {
                    return Err(Error::Format("second created event".into()));
                }
            }
        }
        self.install(handle, session, Some(path.to_path_buf()));
        Ok(session_id)
    }

    fn install(&self, handle: SessionHandle, session: Session, log: Option<PathBuf>) {
        let id = handle.session_id.clone();
        let slot = Arc::new(SessionSlot {
            handle,
            current: RwLock::new(session),
            submit: tokio::sync::Mutex::new(()),
            log,
        });
        self.0
            .sessions
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(id, slot);
    }

    fn build_session(
        &self,
        session_id: String,
        created_at: u64,
        spec: &SessionSpec,
    ) -> Result<(Session, SessionHandle)> {
        let entry = self
            .0
            .registry
            .get(&spec.dataset)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown dataset {:?}", spec.dataset)))?;
        let hp = spec.hyperparams.clone();
        let (pool, eval) = if spec.eval_split {
            let split = stratified_split(&entry.labels, hp.seed)?;
            let labels = split
                .eval
                .iter()
                .map(|&i| {
                    entry.labels.get(i).ok_or_else(|| {
                        Error::InvalidArgument(format!("sample {i} has no label for evaluation"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let eval = EvalSet::new(entry.dataset.subset(&split.eval), labels)?;
            (Arc::new(entry.dataset.subset(&split.train)), Some(eval))
        } else {
            (entry.dataset.clone(), None)
        };
        let n_train = pool.n();
        let has_eval = eval.is_some();
        let session = init_session(pool, hp.clone(), spec.strategy, OracleBinding::Human, eval)?;
        Ok((
            session,
            SessionHandle {
                session_id,
                created_at,
                dataset: spec.dataset.clone(),
                strategy: spec.strategy,
                hyperparams: hp,
                n_train,
                has_eval,
            },
        ))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/datasets", get(list_datasets))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/display", get(get_display))
        .route("/sessions/{id}/labels", post(submit_labels))
        .route("/sessions/{id}/metrics", get(get_metrics))
        .route("/patches/{sample_id}/{side}", get(get_patch))
        .with_state(state)
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(addr: SocketAddr, state: AppState) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(format!("binding {addr}"), e))?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io("serving", e))
}

async fn list_datasets(State(state): State<AppState>) -> Json<Vec<String>> {
    Json(state.0.registry.names().map(str::to_owned).collect())
}

async fn create_session(
    State(state): State<AppState>,
    body: axum::body::Bytes,
) -> ApiResult<(StatusCode, Json<SessionHandle>)> {
    let req: CreateSessionRequest = serde_json::from_slice(&body).map_err(|e| {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e.to_string())
    })?;
    if state.0.registry.get(&req.dataset).is_none() {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_dataset",
            format!("unknown dataset {:?}", req.dataset),
        ));
    }
    let spec = SessionSpec {
        dataset: req.dataset,
        hyperparams: req.hyperparams.unwrap_or_default(),
        strategy: req.strategy.unwrap_or(SamplerKind::Proposed),
        eval_split: req.eval_split,
    };
    spec.hyperparams.validate()?;

    let session_id = uuid::Uuid::new_v4().to_string();
    let created_at = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let worker = state.clone();
    let handle = tokio::task::spawn_blocking(move || -> Result<SessionHandle> {
        let (session, handle) = worker.build_session(session_id.clone(), created_at, &spec)?;
        let log = match &worker.0.state_dir {
            Some(dir) => {
                let path = events::log_path(dir, &session_id);
                events::append(
                    &path,
                    &[Event::Created {
                        session_id,
                        created_at,
                        spec,
                    }],
                )?;
                Some(path)
            }
            None => None,
        };
        worker.install(handle.clone(), session, log);
        Ok(handle)
    })
    .await
    .map_err(join_error)??;
    Ok((StatusCode::CREATED, Json(handle)))
}

fn join_error(e: tokio::task::JoinError) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
}

fn find(state: &AppState, id: &str) -> ApiResult<Arc<SessionSlot>> {
    state.slot(id).ok_or_else(|| ApiError::not_found("session"))
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<SessionHandle>> {
    Ok(Json(find(&state, &id)?.handle.clone()))
}

async fn get_display(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<DisplayResponse>> {
    let session = find(&state, &id)?.snapshot();
    if session.is_finished() {
        return Err(ApiError::conflict("session is finished"));
    }
    let ds = &session.context().dataset;
    let scores = session.current_fhat();
    let has_patches = ds.patch_refs().is_some();
    let items = session
        .pending_display()
        .iter()
        .map(|&i| {
            let sid = &ds.ids()[i];
            DisplayItem {
                sample_id: sid.clone(),
                reference: has_patches.then(|| format!("/patches/{sid}/ref")),
                test: has_patches.then(|| format!("/patches/{sid}/test")),
                score: scores.as_ref().map(|s| s[i]),
            }
        })
        .collect();
    Ok(Json(DisplayResponse {
        session_id: id,
        t: session.state().t,
        items,
    }))
}

/// Maps a body onto pool indices, in display order. Already-labeled ids
/// are a conflict; anything else that is not exactly the pending display is
/// unprocessable.
fn resolve_answers(session: &Session, body: &SubmitRequest) -> ApiResult<Vec<(usize, Label)>> {
    let ds = &session.context().dataset;
    let pending = session.pending_display();
    let labeled: HashSet<usize> = session
        .state()
        .labeled_history
        .iter()
        .flat_map(|d| d.indices.iter().copied())
        .collect();
    let mut seen = HashSet::new();
    let mut by_index = HashMap::new();
    for a in &body.labels {
        let i = ds
            .index_of(&a.sample_id)
            .ok_or_else(|| ApiError::unprocessable(format!("unknown sample {}", a.sample_id)))?;
        if labeled.contains(&i) {
            return Err(ApiError::conflict(format!(
                "sample {} is already labeled",
                a.sample_id
            )));
        }
        if !seen.insert(i) {
            return Err(ApiError::unprocessable(format!(
                "duplicate label for sample {}",
                a.sample_id
            )));
        }
        if !pending.contains(&i) {
            return Err(ApiError::unprocessable(format!(
                "sample {} is not in the pending display",
                a.sample_id
            )));
        }
        let label = Label::from_i64(a.label).ok_or_else(|| {
            ApiError::unprocessable(format!(
                "label for sample {} must be 1 or -1, got {}",
                a.sample_id, a.label
            ))
        })?;
        by_index.insert(i, label);
    }
    pending
        .iter()
        .map(|&i| {
            by_index
                .get(&i)
                .map(|&l| (i, l))
                .ok_or_else(|| ApiError::unprocessable(format!("missing label for sample {}", ds.ids()[i])))
        })
        .collect()
}

async fn submit_labels(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: axum::body::Bytes,
) -> ApiResult<Json<MetricsResponse>> {
    let slot = find(&state, &id)?;
    let body: SubmitRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::unprocessable(e.to_string()))?;
    let Ok(guard) = slot.submit.try_lock() else {
        return Err(ApiError::conflict("another submission for this session is in progress"));
    };
    let session = slot.snapshot();
    if session.is_finished() {
        return Err(ApiError::conflict("session is finished"));
    }
    let answers = resolve_answers(&session, &body)?;

    let worker = slot.clone();
    let response = tokio::task::spawn_blocking(move || -> Result<MetricsResponse> {
        let t = session.state().t;
        let next = session.submit_labels(&answers)?;
        if let Some(path) = &worker.log {
            let ds = &next.context().dataset;
            let labeled = Event::Labeled {
                t,
                answers: answers
                    .iter()
                    .map(|&(i, l)| (ds.ids()[i].clone(), l.as_i8()))
                    .collect(),
            };
            events::append(path, &[labeled, Event::Advanced { t: next.state().t }])?;
        }
        let response = metrics_of(&worker.handle, &next);
        *worker.current.write().unwrap_or_else(|p| p.into_inner()) = next;
        Ok(response)
    })
    .await
    .map_err(join_error)??;
    drop(guard);
    Ok(Json(response))
}

fn metrics_of(handle: &SessionHandle, session: &Session) -> MetricsResponse {
    MetricsResponse {
        session_id: handle.session_id.clone(),
        strategy: handle.strategy,
        t: session.state().t,
        n_train: session.state().metrics.n_train,
        finished: session.is_finished(),
        records: session.state().metrics.records.clone(),
    }
}

async fn get_metrics(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<MetricsResponse>> {
    let slot = find(&state, &id)?;
    Ok(Json(metrics_of(&slot.handle, &slot.snapshot())))
}

async fn get_patch(
    State(state): State<AppState>,
    Path((sample_id, side)): Path<(String, String)>,
) -> ApiResult<Response> {
    let (entry, i) = state
        .0
        .registry
        .find_patch(&sample_id)
        .ok_or_else(|| ApiError::not_found("patch"))?;
    let refs = &entry.dataset.patch_refs().expect("find_patch checks refs")[i];
    let rel = match side.as_str() {
        "ref" => &refs.reference,
        "test" => &refs.test,
        other => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "invalid_argument",
                format!("side must be ref or test, got {other:?}"),
            ))
        }
    };
    let rel = std::path::Path::new(rel);
    if rel.is_absolute() || rel.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
        return Err(ApiError::not_found("patch"));
    }
    let root = entry.root.as_ref().expect("find_patch checks root");
    let bytes = tokio::fs::read(root.join(rel))
        .await
        .map_err(|_| ApiError::not_found("patch"))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}
