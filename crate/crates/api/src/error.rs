use axum::extract::Request;
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::Next;
use axum::response::{IntoResponse, Response};
use axum::Json;
use citadel_core::CoreError;
use serde::{Deserialize, Serialize};

pub const REQUEST_ID_HEADER: &str = "x-request-id";

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
    pub request_id: String,
}

#[derive(Debug, Clone)]
pub struct RequestId(pub String);

/// Error details parked on a response until the request id is attached.
#[derive(Debug, Clone)]
struct ErrorInfo {
    code: &'static str,
    message: String,
}

/// A handler failure.
#[derive(Debug)]
pub struct Failure(pub CoreError);

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        Failure(e)
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let message = match &self.0 {
            CoreError::Internal(detail) => {
                tracing::error!(%detail, "internal error");
                "internal error".to_owned()
            }
            other => other.to_string(),
        };
        let mut resp = status.into_response();
        resp.extensions_mut().insert(ErrorInfo {
            code: self.0.code(),
            message,
        });
        resp
    }
}

/// Codes for error responses produced by the framework rather than a handler.
fn fallback_code(status: StatusCode) -> &'static str {
    match status.as_u16() {
        401 => "unauthenticated",
        403 => "forbidden",
        404 => "not_found",
        405 => "method_not_allowed",
        413 => "too_large",
        422 => "validation_error",
        429 => "rate_limited",
        400..=499 => "bad_request",
        _ => "internal",
    }
}

/// Outermost layer: assigns the request id and renders every error as an
/// [`ApiError`] body.
pub async fn request_id(mut req: Request, next: Next) -> Response {
    let id = uuid::Uuid::new_v4().simple().to_string();
    req.extensions_mut().insert(RequestId(id.clone()));
    let method = req.method().clone();
    let path = req.uri().path().to_owned();
    let mut resp = next.run(req).await;
    let status = resp.status();
    let info = resp.extensions_mut().remove::<ErrorInfo>();
    if info.is_some() || status.is_client_error() || status.is_server_error() {
        let (code, message) = match info {
            Some(i) => (i.code, i.message),
            None => (
                fallback_code(status),
                status.canonical_reason().unwrap_or("error").to_lowercase(),
            ),
        };
        let allow = resp.headers().get(header::ALLOW).cloned();
        resp = (
            status,
            Json(ApiError {
                status: status.as_u16(),
                code: code.to_owned(),
                message,
                request_id: id.clone(),
            }),
        )
            .into_response();
        if let Some(allow) = allow {
            resp.headers_mut().insert(header::ALLOW, allow);
        }
    }
    tracing::debug!(%method, %path, status = status.as_u16(), request_id = %id, "request");
    if let Ok(v) = HeaderValue::from_str(&id) {
        resp.headers_mut().insert(REQUEST_ID_HEADER, v);
    }
    resp
}
