//! HTTP facade over the wiki engine.
//!
//! Every handler is a thin adapter around one [`Wiki`] call. Reads share a
//! lock; saves, deletes and imports take it exclusively, which is the only
//! write serialization the engine needs.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mathwiki_core::store::{QueryPattern, Triple};
use mathwiki_core::wiki::{Links, RevisionId, Wiki, WikiError};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub type SharedWiki = Arc<RwLock<Wiki>>;

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_AUTHOR: &str = "anonymous";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub port: u16,
    pub data_dir: PathBuf,
}

/// Error body returned by every endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            code: code.to_owned(),
            message: message.into(),
            detail: None,
        }
    }

    fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", message)
    }
}

impl From<WikiError> for ApiError {
    fn from(e: WikiError) -> Self {
        let message = e.to_string();
        match e {
            WikiError::Parse(p) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "parse_error", message)
                .with_detail(json!({ "line": p.line, "column": p.column, "code": p.code })),
            WikiError::BadPage { page, .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "bad_page", message).with_detail(json!({ "page": page }))
            }
            WikiError::Conflict { page, head } => ApiError::new(StatusCode::CONFLICT, "conflict", message)
                .with_detail(json!({ "page": page, "head_revision": head })),
            WikiError::CyclicImport { cycle } => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "cyclic_import", message)
                .with_detail(json!({ "cycle": cycle })),
            WikiError::NameCollision { page } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "name_collision", message)
                    .with_detail(json!({ "page": page }))
            }
            WikiError::UnknownPage { page } => {
                ApiError::new(StatusCode::NOT_FOUND, "not_found", message).with_detail(json!({ "page": page }))
            }
            WikiError::Query(_) => ApiError::new(StatusCode::BAD_REQUEST, "bad_query", message),
            WikiError::Storage(_) => ApiError::internal(message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Body of `PUT /pages/{name}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaveRequest {
    pub source: String,
    #[serde(default)]
    pub base_revision: Option<RevisionId>,
}

#[derive(Debug, Clone, Default, Deserialize)]
struct ExportParams {
    #[serde(default)]
    closure: bool,
}

/// `[s, p, o]` arrays split by provenance.
pub fn links_json(links: &Links) -> Value {
    let spo = |ts: &[Triple]| -> Vec<[String; 3]> {
        ts.iter()
            .map(|t| [t.subject.clone(), t.predicate.clone(), t.object.clone()])
            .collect()
    };
    json!({ "extracted": spo(&links.extracted), "inferred": spo(&links.inferred) })
}

fn read(wiki: &SharedWiki) -> ApiResult<RwLockReadGuard<'_, Wiki>> {
    wiki.read().map_err(|_| ApiError::internal("wiki lock poisoned"))
}

fn write(wiki: &SharedWiki) -> ApiResult<RwLockWriteGuard<'_, Wiki>> {
    wiki.write().map_err(|_| ApiError::internal("wiki lock poisoned"))
}

fn author(headers: &HeaderMap) -> String {
    headers
        .get("x-author")
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .unwrap_or(DEFAULT_AUTHOR)
        .to_owned()
}

fn utf8(body: Bytes) -> ApiResult<String> {
    String::from_utf8(body.to_vec()).map_err(|_| ApiError::bad_request("body is not UTF-8"))
}

fn wants_plain(headers: &HeaderMap) -> bool {
    let Some(accept) = headers.get(header::ACCEPT).and_then(|v| v.to_str().ok()) else {
        return false;
    };
    let plain = accept.find("text/plain");
    let xml = accept.find("xml");
    match (plain, xml) {
        (Some(p), Some(x)) => p < x,
        (Some(_), None) => true,
        _ => false,
    }
}

fn xml_response(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/xml; charset=utf-8")], body).into_response()
}

async fn list_pages(State(wiki): State<SharedWiki>) -> ApiResult<Response> {
    Ok(Json(read(&wiki)?.list_pages()).into_response())
}

async fn get_page(State(wiki): State<SharedWiki>, Path(name): Path<String>) -> ApiResult<Response> {
    Ok(Json(read(&wiki)?.page(&name)?).into_response())
}

async fn put_page(
    State(wiki): State<SharedWiki>,
    Path(name): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let req: SaveRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("save request: {e}")))?;
    let receipt = write(&wiki)?.save_page(&name, &req.source, req.base_revision, &author(&headers))?;
    Ok(Json(receipt).into_response())
}

async fn rendered(State(wiki): State<SharedWiki>, Path(name): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    let page = read(&wiki)?.render_page(&name)?;
    if wants_plain(&headers) {
        Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], page.plain()).into_response())
    } else {
        Ok(([(header::CONTENT_TYPE, "text/xml; charset=utf-8")], page.layout_xml()).into_response())
    }
}

async fn links(State(wiki): State<SharedWiki>, Path(name): Path<String>) -> ApiResult<Response> {
    Ok(Json(links_json(&read(&wiki)?.links_for(&name)?)).into_response())
}

async fn history(State(wiki): State<SharedWiki>, Path(name): Path<String>) -> ApiResult<Response> {
    Ok(Json(read(&wiki)?.history(&name)?).into_response())
}

async fn query(State(wiki): State<SharedWiki>, body: Bytes) -> ApiResult<Response> {
    let q: QueryPattern = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_query", format!("query pattern: {e}")))?;
    Ok(Json(read(&wiki)?.query(&q)?).into_response())
}

async fn tasks(State(wiki): State<SharedWiki>) -> ApiResult<Response> {
    Ok(Json(read(&wiki)?.work_queue()).into_response())
}

async fn import(State(wiki): State<SharedWiki>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let xml = utf8(body)?;
    let pages = write(&wiki)?.import_document(&xml, &author(&headers))?;
    Ok(Json(json!({ "pages": pages })).into_response())
}

async fn export(
    State(wiki): State<SharedWiki>,
    Path(theory): Path<String>,
    Query(params): Query<ExportParams>,
) -> ApiResult<Response> {
    Ok(xml_response(read(&wiki)?.export_theory(&theory, params.closure)?))
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

pub fn router(wiki: SharedWiki) -> Router {
    Router::new()
        .route("/pages", get(list_pages))
        .route("/pages/{name}", get(get_page).put(put_page))
        .route("/pages/{name}/rendered", get(rendered))
        .route("/pages/{name}/links", get(links))
        .route("/pages/{name}/history", get(history))
        .route("/query", post(query))
        .route("/tasks", get(tasks))
        .route("/import", post(import))
        .route("/export/{theory}", get(export))
        .fallback(fallback)
        .with_state(wiki)
}

/// Serves `wiki` on an already bound listener until ctrl-c.
pub async fn serve_on(listener: tokio::net::TcpListener, wiki: SharedWiki) -> std::io::Result<()> {
    axum::serve(listener, router(wiki))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Opens the wiki under `config.data_dir`, rebuilding the triple store from
/// disk, and serves it on `config.port`.
pub async fn serve(config: Config) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let wiki = Wiki::open(&config.data_dir)?;
    tracing::info!(pages = wiki.list_pages().len(), dir = %config.data_dir.display(), "wiki loaded");
    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([0, 0, 0, 0], config.port))).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    serve_on(listener, Arc::new(RwLock::new(wiki))).await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accept_negotiation() {
        let h = |v: &str| {
            let mut m = HeaderMap::new();
            m.insert(header::ACCEPT, v.parse().unwrap());
            wants_plain(&m)
        };
        assert!(h("text/plain"));
        assert!(!h("text/xml"));
        assert!(!h("*/*"));
        assert!(h("text/plain, text/xml;q=0.5"));
        assert!(!h("application/xml, text/plain"));
        assert!(!wants_plain(&HeaderMap::new()));
    }

    #[test]
    fn error_mapping() {
        let conflict: ApiError = WikiError::Conflict { page: "a".into(), head: Some(3) }.into();
        assert_eq!(conflict.status, 409);
        assert_eq!(conflict.detail.unwrap()["head_revision"], 3);
        let missing: ApiError = WikiError::UnknownPage { page: "a".into() }.into();
        assert_eq!(missing.status, 404);
        let cyc: ApiError = WikiError::CyclicImport { cycle: vec!["a".into(), "b".into(), "a".into()] }.into();
        assert_eq!((cyc.status, cyc.code.as_str()), (422, "cyclic_import"));
        assert_eq!(ApiError::from(WikiError::Storage("x".into())).status, 500);
    }

    #[test]
    fn author_header() {
        let mut h = HeaderMap::new();
        assert_eq!(author(&h), "anonymous");
        h.insert("x-author", "ada".parse().unwrap());
        assert_eq!(author(&h), "ada");
    }
}
