//! HTTP routes over a shared [`Farm`].

use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{ConnectInfo, Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use evofarm_core::protocol::{
    decode_config, decode_patch, decode_submission, encode_reply, CreateReply, ErrorBody, LoopReply, StatusReport,
};
use serde::Deserialize;

use crate::error::FarmError;
use crate::farm::Farm;

/// Header carrying a client's self-chosen label for per-client statistics.
pub const CLIENT_HEADER: &str = "x-evofarm-client";

pub const WORKER_PAGE: &str = "worker.html";

#[derive(Clone)]
struct AppState {
    farm: Arc<Farm>,
    assets: Option<PathBuf>,
}

pub struct ApiError(pub FarmError);

impl From<FarmError> for ApiError {
    fn from(e: FarmError) -> Self {
        ApiError(e)
    }
}

pub fn status_code(error: &FarmError) -> StatusCode {
    match error.kind() {
        "not_found" => StatusCode::NOT_FOUND,
        "forbidden" => StatusCode::FORBIDDEN,
        "conflict" => StatusCode::CONFLICT,
        "validation" => StatusCode::UNPROCESSABLE_ENTITY,
        "parse" => StatusCode::BAD_REQUEST,
        "lease_expired" => StatusCode::GONE,
        "busy" => StatusCode::SERVICE_UNAVAILABLE,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            kind: self.0.kind().to_string(),
            error: self.0.to_string(),
        };
        let mut response = (status_code(&self.0), Json(body)).into_response();
        if matches!(self.0, FarmError::Busy) {
            response
                .headers_mut()
                .insert(header::RETRY_AFTER, header::HeaderValue::from_static("1"));
        }
        response
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(farm: Arc<Farm>, assets: Option<PathBuf>) -> Router {
    Router::new()
        .route("/algorithm", post(create).get(list))
        .route("/algorithm/generation/{id}", get(worker))
        .route("/algorithm/{id}/packet", get(packet))
        .route("/algorithm/{id}/results", post(results))
        .route("/algorithm/{id}/status", get(status))
        .route("/algorithm/{id}/restart", post(restart))
        .route("/algorithm/{id}/worker", get(worker))
        .route("/worker/{*file}", get(asset))
        .with_state(AppState { farm, assets })
}

fn client_label(headers: &HeaderMap, addr: SocketAddr) -> String {
    headers
        .get(CLIENT_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|s| !s.is_empty() && s.len() <= 128)
        .map(str::to_string)
        .unwrap_or_else(|| addr.ip().to_string())
}

fn reply(reply: LoopReply) -> Response {
    let bytes = encode_reply(&reply).expect("farm replies are well-formed");
    ([(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

async fn create(
    State(app): State<AppState>,
    ConnectInfo(addr): ConnectInfo<SocketAddr>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<CreateReply>)> {
    app.farm.admit(addr.ip())?;
    let config = decode_config(&body).map_err(FarmError::from)?;
    let algorithm_id = app.farm.create(config)?;
    Ok((StatusCode::CREATED, Json(CreateReply { algorithm_id })))
}

async fn list(State(app): State<AppState>) -> Json<Vec<String>> {
    Json(app.farm.ids())
}

async fn packet(
    State(app): State<AppState>,
    ConnectInfo(addr): ConnectInfo<SocketAddr>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    app.farm.admit(addr.ip())?;
    let label = client_label(&headers, addr);
    Ok(reply(app.farm.next_packet(&id, &label).await?))
}

async fn results(
    State(app): State<AppState>,
    ConnectInfo(addr): ConnectInfo<SocketAddr>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    app.farm.admit(addr.ip())?;
    let submission = decode_submission(&body).map_err(FarmError::from)?;
    let label = client_label(&headers, addr);
    Ok(reply(app.farm.submit(&id, &submission, &label).await?))
}

#[derive(Debug, Default, Deserialize)]
struct StatusQuery {
    format: Option<String>,
}

pub const STATUS_CSV_HEADER: &str = "algorithm_id,clients,packet_size,evaluated,seconds,rate";

pub fn status_csv_row(report: &StatusReport) -> String {
    format!(
        "{},{},{},{},{:.6},{:.6}",
        report.algorithm_id,
        report.stats.per_client.len(),
        report.config.packet_size,
        report.stats.evaluated_count,
        report.stats.elapsed_seconds,
        report.rate
    )
}

async fn status(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(query): Query<StatusQuery>,
) -> ApiResult<Response> {
    let report = app.farm.status(&id).await?;
    match query.format.as_deref() {
        None | Some("json") => Ok(Json(report).into_response()),
        Some("csv") => {
            let body = format!("{STATUS_CSV_HEADER}\n{}\n", status_csv_row(&report));
            Ok(([(header::CONTENT_TYPE, "text/csv")], body).into_response())
        }
        Some(other) => Err(FarmError::Invalid(format!("unknown status format {other:?}")).into()),
    }
}

async fn restart(
    State(app): State<AppState>,
    ConnectInfo(addr): ConnectInfo<SocketAddr>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<StatusReport>> {
    app.farm.admit(addr.ip())?;
    let patch = decode_patch(&body).map_err(FarmError::from)?;
    app.farm.restart(&id, &patch).await?;
    Ok(Json(app.farm.status(&id).await?))
}

fn stub_page(id: &str) -> String {
    format!(
        "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>evofarm worker</title></head>\n\
         <body data-algorithm-id=\"{id}\">\n<h1>evofarm worker</h1>\n\
         <p>Worker assets are not installed on this server. Start it with <code>--assets-dir</code>.</p>\n\
         <p><a href=\"/algorithm/{id}/status\">status</a></p>\n</body></html>\n"
    )
}

/// Serves the browser worker page, or a stub when no assets are installed.
async fn worker(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    app.farm.status(&id).await?;
    let page = match &app.assets {
        Some(dir) => tokio::fs::read_to_string(dir.join(WORKER_PAGE)).await.ok(),
        None => None,
    };
    let page = match page {
        Some(html) => html.replace("{{ALGORITHM_ID}}", &id),
        None => stub_page(&id),
    };
    Ok(Html(page).into_response())
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    }
}

async fn asset(State(app): State<AppState>, UrlPath(file): UrlPath<String>) -> Response {
    let relative = Path::new(&file);
    let safe = relative.components().all(|c| matches!(c, Component::Normal(_)));
    let Some(dir) = app.assets.filter(|_| safe) else {
        return StatusCode::NOT_FOUND.into_response();
    };
    let path = dir.join(relative);
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}
