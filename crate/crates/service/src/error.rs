use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use cohortflow::Error;
use serde_json::json;

/// Error body: `{"error": {"code": ..., "message": ...}}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_PARAMETER", message)
    }

    pub fn cluster_not_found(name: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "CLUSTER_NOT_FOUND", format!("no cluster `{name}`"))
    }

    pub fn patient_not_found(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "PATIENT_NOT_FOUND", format!("no patient `{id}`"))
    }

    pub fn model_not_loaded() -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "MODEL_NOT_LOADED", "no model checkpoint is loaded")
    }

    pub fn not_found() -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", "no such endpoint")
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidK { .. } | Error::InvalidConfig(_) => ApiError::invalid(e.to_string()),
            Error::UntrainedPipeline(_) => ApiError::model_not_loaded(),
            Error::EmptyCluster(_) | Error::EmptyGroup => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "EMPTY_GROUP", e.to_string())
            }
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = crate::json::to_canonical_bytes(&json!({"error": {"code": self.code, "message": self.message}}));
        (self.status, [(axum::http::header::CONTENT_TYPE, "application/json")], body).into_response()
    }
}
