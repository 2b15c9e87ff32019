use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use serde::{Deserialize, Serialize};

use dcpviz_core::store::StoreError;
use dcpviz_core::views::ViewError;

/// Problem document sent with every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub status: u16,
    /// Stable machine-readable code, e.g. `unknown_region`.
    pub code: String,
    pub title: String,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub detail: String,
    pub param: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, detail: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            detail: detail.into(),
            param: None,
        }
    }

    pub fn bad_param(param: &str, code: &'static str, detail: impl Into<String>) -> Self {
        ApiError {
            param: Some(param.to_string()),
            ..ApiError::new(StatusCode::BAD_REQUEST, code, detail)
        }
    }

    pub fn not_found(code: &'static str, detail: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, code, detail)
    }

    pub fn internal(detail: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", detail)
    }

    pub fn problem(&self) -> Problem {
        Problem {
            status: self.status.as_u16(),
            code: self.code.to_string(),
            title: self.status.canonical_reason().unwrap_or("Error").to_string(),
            detail: self.detail.clone(),
            param: self.param.clone(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.code, "{}", self.detail);
        }
        let body = serde_json::to_vec(&self.problem()).expect("problem serializes");
        (self.status, [(header::CONTENT_TYPE, "application/problem+json")], body).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_) => ApiError::not_found("not_found", e.to_string()),
            StoreError::UnknownSnapshot(_) => ApiError::not_found("unknown_snapshot", e.to_string()),
            StoreError::InvalidAnnotation(_) => ApiError::new(StatusCode::BAD_REQUEST, "invalid_annotation", e.to_string()),
            other => ApiError::internal(other.to_string()),
        }
    }
}

impl From<ViewError> for ApiError {
    fn from(e: ViewError) -> Self {
        match e {
            ViewError::Store(s) => s.into(),
            other => ApiError::internal(other.to_string()),
        }
    }
}
