use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use mediflow_auth::TokenError;
use mediflow_core::wire::ErrorBody;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApiError {
    #[error("invalid credentials")]
    InvalidCredentials,
    #[error("device not registered to this account")]
    DeviceNotRegistered,
    #[error("authentication failed: {0}")]
    Token(#[from] TokenError),
    #[error("patient not linked to this account")]
    ForbiddenPatient,
    #[error("caller may not perform this action")]
    Forbidden,
    #[error("bad request: {0}")]
    BadRequest(&'static str),
    #[error("not found: {0}")]
    NotFound(&'static str),
    #[error("conflict: {0}")]
    Conflict(&'static str),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::InvalidCredentials | ApiError::Token(_) => StatusCode::UNAUTHORIZED,
            ApiError::DeviceNotRegistered | ApiError::ForbiddenPatient | ApiError::Forbidden => StatusCode::FORBIDDEN,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    /// Value of the `error` field on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::InvalidCredentials => "invalid_credentials",
            ApiError::DeviceNotRegistered => "device_not_registered",
            ApiError::Token(e) => e.code(),
            ApiError::ForbiddenPatient => "forbidden_patient",
            ApiError::Forbidden => "forbidden",
            ApiError::BadRequest(code) | ApiError::NotFound(code) | ApiError::Conflict(code) => code,
            ApiError::Internal(_) => "internal",
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            error: self.code().to_owned(),
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::Internal(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if let ApiError::Internal(msg) = &self {
            tracing::error!(%msg, "request failed");
        }
        (self.status(), Json(self.body())).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
