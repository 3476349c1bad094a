//! Local JSON API over one session. Reads run concurrently; every mutation
//! goes through the write guard.

use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pianotrace_core::fingering::{FingeringRow, Status, Summary};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::bundle::BundlePaths;
use crate::context::{note_context, NoteContext};
use crate::error::ServiceError;
use crate::export::{ExportReport, FingeringFormat};
use crate::session::{LabelOutcome, LabelRequest, Session};

pub type SharedSession = Arc<RwLock<Session>>;

pub const DEFAULT_BIND: &str = "127.0.0.1:8787";

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: String,
    kind: &'a str,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::Validation(_) | ServiceError::Parse { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) | ServiceError::PendingNotes { .. } => StatusCode::CONFLICT,
            ServiceError::Io { .. } | ServiceError::Pipeline(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(ErrorBody { error: self.to_string(), kind: self.kind() })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ServiceError>;

fn read(s: &SharedSession) -> std::sync::RwLockReadGuard<'_, Session> {
    s.read().unwrap_or_else(|e| e.into_inner())
}

fn write(s: &SharedSession) -> std::sync::RwLockWriteGuard<'_, Session> {
    s.write().unwrap_or_else(|e| e.into_inner())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub created_at: String,
    pub bundle: BundlePaths,
    pub summary: Summary,
    pub pending: usize,
    pub audit_entries: u64,
    pub frames_available: bool,
}

async fn session_info(State(s): State<SharedSession>) -> ApiResult<SessionInfo> {
    let s = read(&s);
    let st = s.state();
    Ok(Json(SessionInfo {
        session_id: st.session_id.clone(),
        created_at: st.created_at.clone(),
        bundle: st.bundle.clone(),
        summary: s.summary(),
        pending: s.pending_count(),
        audit_entries: st.audit_seq,
        frames_available: st.bundle.frames_dir.is_some(),
    }))
}

#[derive(Debug, Deserialize)]
struct NotesQuery {
    status: Option<String>,
}

async fn list_notes(State(s): State<SharedSession>, Query(q): Query<NotesQuery>) -> ApiResult<Vec<FingeringRow>> {
    let keep: Box<dyn Fn(Status) -> bool + Send> = match q.status.as_deref().unwrap_or("all") {
        "all" => Box::new(|_| true),
        "pending" => Box::new(Status::is_pending),
        other => {
            let wanted = [Status::Auto, Status::Manual, Status::PendingNone, Status::PendingMulti]
                .into_iter()
                .find(|st| st.as_str() == other)
                .ok_or_else(|| ServiceError::Validation(format!("unknown status filter {other:?}")))?;
            Box::new(move |st| st == wanted)
        }
    };
    let s = read(&s);
    let mut rows: Vec<FingeringRow> = s.annotation().entries.iter().filter(|e| keep(e.status)).map(FingeringRow::from).collect();
    rows.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s).then(a.note_id.cmp(&b.note_id)));
    Ok(Json(rows))
}

async fn context(State(s): State<SharedSession>, Path(id): Path<u32>) -> ApiResult<NoteContext> {
    note_context(&read(&s), id).map(Json)
}

async fn label(State(s): State<SharedSession>, Path(id): Path<u32>, Json(req): Json<LabelRequest>) -> ApiResult<LabelOutcome> {
    write(&s).submit_label(id, &req).map(Json)
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct ExportRequest {
    pub format: FingeringFormat,
    pub allow_partial: bool,
}

/// Writes into the session's `export/` directory.
async fn export(State(s): State<SharedSession>, body: Option<Json<ExportRequest>>) -> ApiResult<ExportReport> {
    let req = body.map(|Json(r)| r).unwrap_or_default();
    read(&s).export(None, req.format, req.allow_partial).map(Json)
}

pub fn router(session: SharedSession) -> Router {
    let frames = read(&session).state().bundle.frames_dir.clone();
    let api = Router::new()
        .route("/api/session", get(session_info))
        .route("/api/notes", get(list_notes))
        .route("/api/notes/:id/context", get(context))
        .route("/api/notes/:id/label", post(label))
        .route("/api/export", post(export))
        .with_state(session);
    match frames {
        Some(dir) => api.nest_service("/frames", ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(session: SharedSession, addr: SocketAddr) -> std::io::Result<()> {
    if !addr.ip().is_loopback() {
        log::warn!("binding to non-loopback address {addr}; the API has no authentication");
    }
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("serving on http://{}", listener.local_addr()?);
    axum::serve(listener, router(session))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
