use axum::body::Bytes;
use axum::extract::multipart::MultipartError;
use axum::extract::{FromRequest, FromRequestParts, Query, Request};
use axum::http::request::Parts;
use citadel_core::auth::Principal;
use citadel_core::CoreError;
use serde::de::DeserializeOwned;

use crate::error::Failure;

/// The principal the guard attached to the request.
pub struct Caller(pub Principal);

impl<S: Send + Sync> FromRequestParts<S> for Caller {
    type Rejection = Failure;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> Result<Self, Failure> {
        parts
            .extensions
            .get::<Principal>()
            .cloned()
            .map(Caller)
            .ok_or(Failure(CoreError::Unauthenticated))
    }
}

/// JSON body without a content-type requirement. An empty body reads as `{}`.
pub struct JsonBody<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for JsonBody<T> {
    type Rejection = Failure;

    async fn from_request(req: Request, state: &S) -> Result<Self, Failure> {
        let bytes = Bytes::from_request(req, state).await.map_err(|r| {
            if r.status().as_u16() == 413 {
                Failure(CoreError::TooLarge)
            } else {
                Failure(CoreError::BadRequest(r.body_text()))
            }
        })?;
        let raw: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) { b"{}" } else { &bytes };
        serde_json::from_slice(raw)
            .map(JsonBody)
            .map_err(|e| Failure(CoreError::BadRequest(e.to_string())))
    }
}

/// Query string parameters with errors reported as `bad_request`.
pub struct Params<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for Params<T> {
    type Rejection = Failure;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Failure> {
        Query::<T>::from_request_parts(parts, state)
            .await
            .map(|Query(v)| Params(v))
            .map_err(|r| Failure(CoreError::BadRequest(r.body_text())))
    }
}

pub fn multipart_error(e: MultipartError) -> Failure {
    if e.status().as_u16() == 413 {
        Failure(CoreError::TooLarge)
    } else {
        Failure(CoreError::BadRequest(e.body_text()))
    }
}
