//! Routes and handlers.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use hexkey_core::charact::{LogEntry, Progress};
use hexkey_core::corpus::{ingest_phrases, phrases, BUILTIN_PHRASES};
use hexkey_core::layout::{flip_vertical, generate_layout, qwerty_layout};
use hexkey_core::{
    build_grid, default_grid, CharacterizationSession, DigraphMatrix, DirectionalFittsModel, Error, FaqParams,
    KeyPosition, KeyboardLayout, LayoutKind, Phase,
};

use crate::store::{self, valid_id};
use crate::trial::{KeystrokeInput, TrialError, TrialLine, TrialRecord};
use crate::{AppState, SessionRecord};

type AppResult<T> = Result<T, ApiError>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, format!("no {what} {id:?}"))
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, message)
    }

    fn conflict(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::CONFLICT, message)
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        log::error!("{e}");
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidArgument(_) | Error::Parse { .. } | Error::Json(_) | Error::UndefinedAngle => {
                StatusCode::BAD_REQUEST
            }
            Error::InvalidState(_) | Error::ProtocolStall { .. } => StatusCode::CONFLICT,
            Error::EmptyCorpus | Error::Degenerate(_) | Error::ModelUnusable | Error::SizeGuard { .. } => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<TrialError> for ApiError {
    fn from(e: TrialError) -> Self {
        match e {
            TrialError::Invalid(m) => ApiError::bad_request(m),
            TrialError::Conflict(m) => ApiError::conflict(m),
        }
    }
}

/// JSON body with rejections mapped onto our error shape.
fn body<T>(payload: Result<Json<T>, JsonRejection>) -> AppResult<T> {
    match payload {
        Ok(Json(v)) => Ok(v),
        Err(JsonRejection::MissingJsonContentType(e)) => {
            Err(ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, e.body_text()))
        }
        Err(e) => Err(ApiError::bad_request(e.body_text())),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_snapshot))
        .route("/sessions/{id}/clicks", post(click))
        .route("/sessions/{id}/pause", post(pause))
        .route("/sessions/{id}/log", get(session_log))
        .route("/sessions/{id}/model", get(session_model))
        .route("/layouts", post(create_layout))
        .route("/layouts/{id}", get(get_layout))
        .route("/trials", post(create_trial))
        .route("/trials/{id}/keystrokes", post(keystroke))
        .route("/trials/{id}/finish", post(finish_trial))
        .with_state(state)
}

// ---- sessions ----

#[derive(Deserialize)]
struct GridSpec {
    rows: usize,
    cols: usize,
    key_width_px: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewSession {
    seed: u64,
    #[serde(default)]
    grid: Option<GridSpec>,
}

#[derive(Serialize)]
struct SessionCreated {
    session_id: String,
    first_target: Option<KeyPosition>,
    origin: KeyPosition,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<NewSession>, JsonRejection>,
) -> AppResult<(StatusCode, Json<SessionCreated>)> {
    let req = body(payload)?;
    let grid = match req.grid {
        Some(g) => build_grid(g.rows, g.cols, g.key_width_px)?,
        None => default_grid(),
    };
    let session = CharacterizationSession::new(grid, req.seed);
    let first_target = session.next_target()?;
    let header = serde_json::to_string(&session.header()).map_err(ApiError::internal)?;

    let id = state.next_id('s');
    state
        .store
        .append_line(store::SESSIONS, &id, &header)
        .map_err(ApiError::internal)?;
    let created = SessionCreated {
        session_id: id.clone(),
        first_target,
        origin: *session.current_key(),
    };
    state
        .sessions
        .lock()
        .expect("session map")
        .insert(id, Arc::new(tokio::sync::Mutex::new(SessionRecord { session })));
    Ok((StatusCode::CREATED, Json(created)))
}

fn lookup_session(state: &AppState, id: &str) -> AppResult<crate::Shared<SessionRecord>> {
    if !valid_id(id) {
        return Err(ApiError::not_found("session", id));
    }
    state.session(id).ok_or_else(|| ApiError::not_found("session", id))
}

#[derive(Serialize)]
struct Snapshot {
    session_id: String,
    seed: u64,
    phase: Phase,
    events: usize,
    current_key: KeyPosition,
    next_target: Option<KeyPosition>,
    progress: Progress,
}

async fn session_snapshot(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> AppResult<Json<Snapshot>> {
    let shared = lookup_session(&state, &id)?;
    let rec = shared.lock().await;
    let s = &rec.session;
    Ok(Json(Snapshot {
        session_id: id,
        seed: s.seed(),
        phase: s.phase(),
        events: s.events().count(),
        current_key: *s.current_key(),
        next_target: s.next_target().ok().flatten(),
        progress: s.progress(),
    }))
}

#[derive(Deserialize)]
struct KeyRef {
    row: usize,
    col: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Click {
    clicked_key: KeyRef,
    /// Seconds since the session started.
    t: f64,
    /// Sequence number the client assigns this click; a repeat of the last
    /// recorded one is answered without recording it again.
    #[serde(default)]
    client_seq: Option<u64>,
}

#[derive(Serialize)]
struct ClickResult {
    success: bool,
    next_target: Option<KeyPosition>,
    progress: Progress,
}

async fn click(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    payload: Result<Json<Click>, JsonRejection>,
) -> AppResult<Json<ClickResult>> {
    let shared = lookup_session(&state, &id)?;
    let req = body(payload)?;
    let mut rec = shared.lock().await;

    let recorded = rec.session.events().count() as u64;
    if let Some(seq) = req.client_seq {
        if seq == recorded && seq > 0 {
            let last = rec.session.events().last().expect("seq > 0");
            return Ok(Json(ClickResult {
                success: last.success,
                next_target: rec.session.next_target().ok().flatten(),
                progress: rec.session.progress(),
            }));
        }
        if seq != recorded + 1 {
            return Err(ApiError::conflict(format!(
                "client_seq {seq} does not follow event {recorded}"
            )));
        }
    }
    if rec.session.phase() == Phase::Complete {
        return Err(ApiError::conflict("session is complete"));
    }
    let grid = rec.session.grid();
    let key = grid.index_of(req.clicked_key.row, req.clicked_key.col).ok_or_else(|| {
        ApiError::bad_request(format!(
            "clicked_key: ({}, {}) is off the grid",
            req.clicked_key.row, req.clicked_key.col
        ))
    })?;
    let event = rec.session.click(key, req.t)?;
    persist_last(&state, &id, &mut rec)?;
    Ok(Json(ClickResult {
        success: event.success,
        next_target: rec.session.next_target().ok().flatten(),
        progress: rec.session.progress(),
    }))
}

/// Appends the session's newest entry to its log. If that fails the
/// in-memory state is rebuilt from disk so it never runs ahead of the log.
fn persist_last(state: &AppState, id: &str, rec: &mut SessionRecord) -> AppResult<()> {
    let entry = rec.session.entries().last().expect("just appended");
    let line = CharacterizationSession::log_line(entry);
    if let Err(e) = state.store.append_line(store::SESSIONS, id, &line) {
        let restored = state
            .store
            .read(store::SESSIONS, id, "ndjson")
            .map_err(anyhow::Error::from)
            .and_then(|text| Ok(hexkey_core::charact::import_log(&text)?));
        match restored {
            Ok(session) => rec.session = session,
            Err(re) => log::error!("session {id}: reload after failed write also failed: {re}"),
        }
        return Err(ApiError::internal(format!("session {id}: log write failed: {e}")));
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Pause {
    t0: f64,
    t1: f64,
}

async fn pause(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    payload: Result<Json<Pause>, JsonRejection>,
) -> AppResult<StatusCode> {
    let shared = lookup_session(&state, &id)?;
    let req = body(payload)?;
    let mut rec = shared.lock().await;
    rec.session.pause(req.t0, req.t1)?;
    debug_assert!(matches!(rec.session.entries().last(), Some(LogEntry::Pause { .. })));
    persist_last(&state, &id, &mut rec)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn session_log(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> AppResult<Response> {
    let shared = lookup_session(&state, &id)?;
    let text = shared.lock().await.session.export_log();
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

async fn session_model(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> AppResult<Response> {
    let shared = lookup_session(&state, &id)?;
    let model = {
        let rec = shared.lock().await;
        if rec.session.phase() != Phase::Complete {
            return Err(ApiError::conflict("characterization is still running"));
        }
        rec.session.fit()?
    };
    let text = model.to_json();
    state
        .store
        .write_atomic(store::MODELS, &id, "json", &text)
        .map_err(ApiError::internal)?;
    Ok(json_text(text))
}

fn json_text(text: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], text).into_response()
}

// ---- layouts ----

#[derive(Deserialize)]
struct SolverSpec {
    restarts: Option<usize>,
    max_iters: Option<usize>,
    tol: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewLayout {
    kind: String,
    #[serde(default)]
    model: Option<DirectionalFittsModel>,
    #[serde(default)]
    model_ref: Option<String>,
    #[serde(default)]
    session_id: Option<String>,
    #[serde(default)]
    corpus_ref: Option<String>,
    seed: u64,
    #[serde(default)]
    solver: Option<SolverSpec>,
    #[serde(default)]
    flip: bool,
}

#[derive(Serialize)]
struct LayoutCreated {
    layout_id: String,
    layout: serde_json::Value,
}

/// Digraphs for a corpus reference: `builtin` or an uploaded `corpora/{ref}.txt`.
fn load_corpus(state: &AppState, corpus_ref: &str) -> AppResult<DigraphMatrix> {
    let text = if corpus_ref == "builtin" {
        BUILTIN_PHRASES.to_string()
    } else {
        if !valid_id(corpus_ref) {
            return Err(ApiError::not_found("corpus", corpus_ref));
        }
        state
            .store
            .read(store::CORPORA, corpus_ref, "txt")
            .map_err(|_| ApiError::not_found("corpus", corpus_ref))?
    };
    Ok(ingest_phrases(phrases(&text)))
}

async fn resolve_model(state: &AppState, req: &NewLayout) -> AppResult<Option<DirectionalFittsModel>> {
    let given = [req.model.is_some(), req.model_ref.is_some(), req.session_id.is_some()];
    if given.iter().filter(|&&g| g).count() > 1 {
        return Err(ApiError::bad_request(
            "give at most one of model, model_ref, session_id",
        ));
    }
    if let Some(m) = &req.model {
        return Ok(Some(m.clone()));
    }
    if let Some(r) = &req.model_ref {
        if !valid_id(r) {
            return Err(ApiError::not_found("model", r));
        }
        let text = state
            .store
            .read(store::MODELS, r, "json")
            .map_err(|_| ApiError::not_found("model", r))?;
        let model =
            DirectionalFittsModel::from_json(&text).map_err(|e| ApiError::internal(format!("model {r}: {e}")))?;
        return Ok(Some(model));
    }
    if let Some(sid) = &req.session_id {
        let shared = lookup_session(state, sid)?;
        let rec = shared.lock().await;
        if rec.session.phase() != Phase::Complete {
            return Err(ApiError::conflict(format!("session {sid} is still running")));
        }
        return Ok(Some(rec.session.fit()?));
    }
    Ok(None)
}

async fn create_layout(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<NewLayout>, JsonRejection>,
) -> AppResult<(StatusCode, Response)> {
    let req = body(payload)?;
    let kind: LayoutKind = req
        .kind
        .parse()
        .map_err(|e: Error| ApiError::bad_request(format!("kind: {e}")))?;
    let model = resolve_model(&state, &req).await?;
    let digraphs = load_corpus(&state, req.corpus_ref.as_deref().unwrap_or("builtin"))?;
    let mut params = FaqParams {
        seed: req.seed,
        ..FaqParams::default()
    };
    if let Some(s) = &req.solver {
        params.restarts = s.restarts.unwrap_or(params.restarts);
        params.max_iters = s.max_iters.unwrap_or(params.max_iters);
        params.tol = s.tol.unwrap_or(params.tol);
    }
    let key_width = model.as_ref().map_or(default_grid().key_width(), |m| m.key_width);
    let flip = req.flip;

    // the solver is CPU-bound; keep it off the async workers
    let layout = tokio::task::spawn_blocking(move || -> hexkey_core::Result<KeyboardLayout> {
        let layout = match kind {
            LayoutKind::Qwerty => qwerty_layout(key_width)?,
            _ => {
                let grid = build_grid(9, 9, key_width)?;
                generate_layout(kind, model.as_ref(), &digraphs, &grid, &params)?
            }
        };
        Ok(if flip { flip_vertical(&layout) } else { layout })
    })
    .await
    .map_err(ApiError::internal)??;

    let text = layout.to_json();
    let id = state.next_id('l');
    state
        .store
        .write_atomic(store::LAYOUTS, &id, "json", &text)
        .map_err(ApiError::internal)?;
    let created = LayoutCreated {
        layout_id: id,
        layout: serde_json::from_str(&text).map_err(ApiError::internal)?,
    };
    Ok((StatusCode::CREATED, Json(created).into_response()))
}

async fn get_layout(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> AppResult<Response> {
    if !valid_id(&id) {
        return Err(ApiError::not_found("layout", &id));
    }
    let text = state
        .store
        .read(store::LAYOUTS, &id, "json")
        .map_err(|_| ApiError::not_found("layout", &id))?;
    Ok(json_text(text))
}

// ---- trials ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewTrial {
    layout_id: String,
    prompt: String,
}

#[derive(Serialize)]
struct TrialCreated {
    trial_id: String,
    prompt: String,
}

async fn create_trial(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<NewTrial>, JsonRejection>,
) -> AppResult<(StatusCode, Json<TrialCreated>)> {
    let req = body(payload)?;
    if !valid_id(&req.layout_id) {
        return Err(ApiError::not_found("layout", &req.layout_id));
    }
    let text = state
        .store
        .read(store::LAYOUTS, &req.layout_id, "json")
        .map_err(|_| ApiError::not_found("layout", &req.layout_id))?;
    let layout = KeyboardLayout::from_json(&text)?;
    let record = TrialRecord::new(req.layout_id, layout, &req.prompt)?;

    let id = state.next_id('t');
    let header = serde_json::to_string(&record.header()).map_err(ApiError::internal)?;
    state
        .store
        .append_line(store::TRIALS, &id, &header)
        .map_err(ApiError::internal)?;
    let created = TrialCreated {
        trial_id: id.clone(),
        prompt: record.prompt.clone(),
    };
    state
        .trials
        .lock()
        .expect("trial map")
        .insert(id, Arc::new(tokio::sync::Mutex::new(record)));
    Ok((StatusCode::CREATED, Json(created)))
}

fn lookup_trial(state: &AppState, id: &str) -> AppResult<crate::Shared<TrialRecord>> {
    if !valid_id(id) {
        return Err(ApiError::not_found("trial", id));
    }
    state.trial(id).ok_or_else(|| ApiError::not_found("trial", id))
}

async fn keystroke(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    payload: Result<Json<KeystrokeInput>, JsonRejection>,
) -> AppResult<StatusCode> {
    let shared = lookup_trial(&state, &id)?;
    let k = body(payload)?;
    let mut rec = shared.lock().await;
    // validate on a copy so a failed write leaves the record untouched
    let mut next = rec.clone();
    next.keystroke(k)?;
    let line = serde_json::to_string(&TrialLine::Keystroke(k)).map_err(ApiError::internal)?;
    state
        .store
        .append_line(store::TRIALS, &id, &line)
        .map_err(ApiError::internal)?;
    *rec = next;
    Ok(StatusCode::NO_CONTENT)
}

async fn finish_trial(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> AppResult<Response> {
    let shared = lookup_trial(&state, &id)?;
    let mut rec = shared.lock().await;
    let report = rec
        .report()
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    if !rec.finished {
        let line = serde_json::to_string(&TrialLine::Finish).map_err(ApiError::internal)?;
        state
            .store
            .append_line(store::TRIALS, &id, &line)
            .map_err(ApiError::internal)?;
        rec.finished = true;
    }
    Ok(Json(report).into_response())
}
