//! HTTP server: every request goes through [`api::handle`] on a blocking
//! worker thread.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;

use crate::api::{self, ApiRequest, AUDIT_TOKEN_HEADER, TOKEN_HEADER};
use crate::error::{Error, Result};
use crate::service::Service;

pub fn router(service: Arc<Service>) -> Router {
    Router::new().fallback(dispatch).with_state(service)
}

fn header_text(headers: &HeaderMap, name: &str) -> Option<String> {
    headers.get(name).and_then(|v| v.to_str().ok()).map(str::to_string)
}

async fn dispatch(State(service): State<Arc<Service>>, method: Method, uri: Uri, headers: HeaderMap, body: Bytes) -> Response {
    let mut request = ApiRequest::new(method.as_str(), &uri.to_string());
    request.token = header_text(&headers, TOKEN_HEADER);
    request.audit_token = header_text(&headers, AUDIT_TOKEN_HEADER);
    request.content_type = header_text(&headers, header::CONTENT_TYPE.as_str());
    request.body = body.to_vec();
    let response = match tokio::task::spawn_blocking(move || api::handle(&service, &request)).await {
        Ok(r) => r,
        Err(e) => api::ApiResponse::error(&Error::Storage(format!("worker failed: {e}"))),
    };
    let status = StatusCode::from_u16(response.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let mut out = (status, response.body).into_response();
    out.headers_mut().insert(header::CONTENT_TYPE, HeaderValue::from_static(response.content_type));
    out
}

/// Binds `addr` and serves until the process is stopped. Returns the bound
/// address through `on_bound` first so callers can use port 0.
pub async fn serve(service: Arc<Service>, addr: SocketAddr, on_bound: impl FnOnce(SocketAddr)) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| Error::Config(format!("bind {addr}: {e}")))?;
    let bound = listener.local_addr().map_err(|e| Error::Config(e.to_string()))?;
    on_bound(bound);
    axum::serve(listener, router(service)).await.map_err(|e| Error::Storage(format!("server: {e}")))
}
