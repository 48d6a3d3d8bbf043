use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use super::sessions::{ExecuteRequest, ServiceError, SessionService};
use crate::docspec::docspec_to_json;
use crate::pipeline::PipelineError;
use crate::report::{ValidationReport, ViolationKind};

pub type AppState = Arc<SessionService>;

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

fn body(code: &str, message: impl std::fmt::Display) -> Value {
    json!({"error": code, "message": message.to_string()})
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let e = self.0;
        let (status, payload) = match &e {
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, body("not_found", &e)),
            ServiceError::NotReady(_) => (StatusCode::CONFLICT, body("not_ready", &e)),
            ServiceError::JobInProgress => (StatusCode::CONFLICT, body("job_in_progress", &e)),
            ServiceError::Conflict { expected, current } => {
                let mut b = body("conflict", &e);
                b["expected"] = json!(expected);
                b["current"] = json!(current);
                (StatusCode::CONFLICT, b)
            }
            ServiceError::Invalid(report) => {
                let mut b = body("invalid", &e);
                b["report"] = serde_json::to_value(report).expect("report serializes");
                (StatusCode::UNPROCESSABLE_ENTITY, b)
            }
            ServiceError::Rejected(turn) => {
                let mut b = body("rejected", &e);
                b["turn"] = serde_json::to_value(turn).expect("turn serializes");
                b["report"] = serde_json::to_value(&turn.report).expect("report serializes");
                (StatusCode::UNPROCESSABLE_ENTITY, b)
            }
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, body("bad_request", &e)),
            ServiceError::Pipeline(p) => {
                let status = match p {
                    PipelineError::Provider { .. } | PipelineError::Config(_) => StatusCode::BAD_GATEWAY,
                    _ => StatusCode::UNPROCESSABLE_ENTITY,
                };
                let mut b = p.to_json();
                b["message"] = json!(p.to_string());
                (status, b)
            }
            ServiceError::Store(_) => {
                log::error!("{e}");
                (StatusCode::INTERNAL_SERVER_ERROR, body("internal", &e))
            }
            ServiceError::ShuttingDown => (StatusCode::SERVICE_UNAVAILABLE, body("shutting_down", &e)),
        };
        (status, Json(payload)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs a blocking service call off the async executor.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> ApiResult<T> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError),
        Err(e) => Err(ApiError(ServiceError::BadRequest(format!("request task failed: {e}")))),
    }
}

fn parse_body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    let bytes: &[u8] = if bytes.is_empty() { b"{}" } else { bytes };
    serde_json::from_slice(bytes).map_err(|e| {
        let mut r = ValidationReport::new();
        r.add(ViolationKind::Schema, "", format!("request body: {e}"));
        ApiError(ServiceError::Invalid(r))
    })
}

fn etag(revision: u64) -> HeaderValue {
    HeaderValue::from_str(&format!("\"{revision}\"")).expect("etag is ascii")
}

fn if_match(headers: &HeaderMap) -> ApiResult<Option<u64>> {
    let Some(v) = headers.get(header::IF_MATCH) else {
        return Ok(None);
    };
    let s = v.to_str().unwrap_or("").trim();
    let s = s.strip_prefix("W/").unwrap_or(s).trim_matches('"');
    s.parse::<u64>()
        .map(Some)
        .map_err(|_| ApiError(ServiceError::BadRequest(format!("If-Match '{s}' is not a revision id"))))
}

async fn schema() -> Response {
    (
        [(header::CONTENT_TYPE, "application/schema+json")],
        crate::cli::DOCSPEC_SCHEMA,
    )
        .into_response()
}

async fn health() -> Json<Value> {
    Json(json!({"status": "ok", "version": env!("CARGO_PKG_VERSION")}))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    topic: String,
}

async fn create_session(State(svc): State<AppState>, bytes: Bytes) -> ApiResult<Response> {
    let req: CreateSession = parse_body(&bytes)?;
    let s = blocking(move || svc.create_session(&req.topic)).await?;
    let location = HeaderValue::from_str(&format!("/sessions/{}", s.id)).expect("ascii id");
    Ok((StatusCode::CREATED, [(header::LOCATION, location)], Json(s)).into_response())
}

async fn list_sessions(State(svc): State<AppState>) -> ApiResult<Response> {
    let list = blocking(move || svc.list_sessions()).await?;
    Ok(Json(json!({ "sessions": list })).into_response())
}

async fn get_session(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(move || svc.get_session(&id)).await?).into_response())
}

async fn get_docspec(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let (rev, spec) = blocking(move || svc.get_docspec(&id)).await?;
    Ok(([(header::ETAG, etag(rev.id))], Json(docspec_to_json(&spec))).into_response())
}

async fn put_docspec(
    State(svc): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    bytes: Bytes,
) -> ApiResult<Response> {
    let expected = if_match(&headers)?;
    let value: Value = parse_body(&bytes)?;
    let out = blocking(move || svc.put_docspec(&id, &value, expected)).await?;
    Ok(([(header::ETAG, etag(out.revision.id))], Json(out)).into_response())
}

async fn list_revisions(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let s = blocking(move || svc.get_session(&id)).await?;
    Ok(Json(json!({ "revisions": s.revisions })).into_response())
}

async fn get_revision(State(svc): State<AppState>, Path((id, n)): Path<(String, u64)>) -> ApiResult<Response> {
    let (rev, spec) = blocking(move || svc.get_revision(&id, n)).await?;
    Ok(([(header::ETAG, etag(rev.id))], Json(docspec_to_json(&spec))).into_response())
}

async fn execute(State(svc): State<AppState>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let req: ExecuteRequest = parse_body(&bytes)?;
    let job = blocking(move || svc.execute_session(&id, req)).await?;
    Ok((StatusCode::ACCEPTED, Json(job)).into_response())
}

async fn get_job(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    match blocking(move || svc.job(&id)).await? {
        Some(job) => Ok(Json(job).into_response()),
        None => Err(ApiError(ServiceError::NotFound("job".into()))),
    }
}

async fn restart_job(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let job = blocking(move || svc.restart_job(&id)).await?;
    Ok((StatusCode::ACCEPTED, Json(job)).into_response())
}

async fn get_document(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let html = blocking(move || svc.get_document(&id)).await?;
    Ok(([(header::CONTENT_TYPE, "text/html; charset=utf-8")], html).into_response())
}

async fn evaluate(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(move || svc.evaluate_session(&id)).await?).into_response())
}

async fn get_evaluation(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(move || svc.get_evaluation(&id)).await?).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChatRequest {
    message: String,
}

async fn chat(State(svc): State<AppState>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let req: ChatRequest = parse_body(&bytes)?;
    let turn = blocking(move || svc.chat_edit(&id, &req.message)).await?;
    Ok((StatusCode::CREATED, Json(turn)).into_response())
}

async fn accept_chat(State(svc): State<AppState>, Path((id, turn)): Path<(String, u64)>) -> ApiResult<Response> {
    let out = blocking(move || svc.accept_chat(&id, turn)).await?;
    Ok(([(header::ETAG, etag(out.revision.id))], Json(out)).into_response())
}

async fn reject_chat(State(svc): State<AppState>, Path((id, turn)): Path<(String, u64)>) -> ApiResult<Response> {
    Ok(Json(blocking(move || svc.reject_chat(&id, turn)).await?).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CompileRequest {
    interaction: Value,
    #[serde(default = "default_container")]
    container_id: String,
}

fn default_container() -> String {
    "preview".into()
}

async fn compile(State(svc): State<AppState>, bytes: Bytes) -> ApiResult<Response> {
    let req: CompileRequest = parse_body(&bytes)?;
    let fragment = blocking(move || svc.compile_preview(&req.interaction, &req.container_id)).await?;
    Ok(Json(fragment).into_response())
}

pub fn router(state: AppState, cors: bool) -> Router {
    let r = Router::new()
        .route("/health", get(health))
        .route("/schema", get(schema))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/docspec", get(get_docspec).put(put_docspec))
        .route("/sessions/{id}/revisions", get(list_revisions))
        .route("/sessions/{id}/revisions/{n}", get(get_revision))
        .route("/sessions/{id}/execute", post(execute))
        .route("/sessions/{id}/job", get(get_job))
        .route("/sessions/{id}/job/restart", post(restart_job))
        .route("/sessions/{id}/document", get(get_document))
        .route("/sessions/{id}/evaluate", post(evaluate))
        .route("/sessions/{id}/evaluation", get(get_evaluation))
        .route("/sessions/{id}/chat", post(chat))
        .route("/sessions/{id}/chat/{turn}/accept", post(accept_chat))
        .route("/sessions/{id}/chat/{turn}/reject", post(reject_chat))
        .route("/compile", post(compile))
        .with_state(state);
    if cors {
        r.layer(
            tower_http::cors::CorsLayer::permissive()
                .expose_headers([header::ETAG, header::LOCATION]),
        )
    } else {
        r
    }
}
