use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

/// Stable machine-readable error identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    InvalidRequest,
    UndecodableMedia,
    MissingAudioTrack,
    PayloadTooLarge,
    InvalidEmbedding,
    ExtractorFailure,
    EmbeddingDimMismatch,
    ExtractorTimeout,
    ModelUnavailable,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::InvalidRequest | ErrorCode::UndecodableMedia => StatusCode::BAD_REQUEST,
            ErrorCode::MissingAudioTrack | ErrorCode::InvalidEmbedding => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::PayloadTooLarge => StatusCode::PAYLOAD_TOO_LARGE,
            ErrorCode::ExtractorFailure | ErrorCode::EmbeddingDimMismatch => StatusCode::BAD_GATEWAY,
            ErrorCode::ExtractorTimeout => StatusCode::GATEWAY_TIMEOUT,
            ErrorCode::ModelUnavailable => StatusCode::SERVICE_UNAVAILABLE,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::InvalidRequest => "invalid_request",
            ErrorCode::UndecodableMedia => "undecodable_media",
            ErrorCode::MissingAudioTrack => "missing_audio_track",
            ErrorCode::PayloadTooLarge => "payload_too_large",
            ErrorCode::InvalidEmbedding => "invalid_embedding",
            ErrorCode::ExtractorFailure => "extractor_failure",
            ErrorCode::EmbeddingDimMismatch => "embedding_dim_mismatch",
            ErrorCode::ExtractorTimeout => "extractor_timeout",
            ErrorCode::ModelUnavailable => "model_unavailable",
            ErrorCode::Internal => "internal",
        }
    }
}

impl std::fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Error body of every failed request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("{error_code}: {message}")]
pub struct ApiError {
    pub error_code: ErrorCode,
    pub message: String,
    pub detail: Option<String>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            error_code: code,
            message: message.into(),
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn status(&self) -> StatusCode {
        self.error_code.status()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self)).into_response()
    }
}
