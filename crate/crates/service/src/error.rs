use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error(transparent)]
    Core(#[from] ninegrid::Error),

    #[error("question {got} requested, but the session is at question {expected}")]
    WrongQuestion { expected: usize, got: usize },

    #[error("session `{0}` has already answered every question")]
    SessionCompleted(String),

    #[error("{0}")]
    Conflict(String),

    #[error("{0}")]
    BadRequest(String),
}

pub type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::Core(e) => e.code(),
            ApiError::WrongQuestion { .. } => "wrong_question",
            ApiError::SessionCompleted(_) => "session_completed",
            ApiError::Conflict(_) => "conflict",
            ApiError::BadRequest(_) => "bad_request",
        }
    }

    pub fn status(&self) -> StatusCode {
        use ninegrid::Error as E;
        match self {
            ApiError::Core(e) => match e {
                E::NotFound(_) => StatusCode::NOT_FOUND,
                E::AlreadyAnswered { .. } => StatusCode::CONFLICT,
                E::InvalidChoice(_) | E::BundleInvalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
                E::InvalidInput(_) | E::MixedStudy(..) => StatusCode::BAD_REQUEST,
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            },
            ApiError::WrongQuestion { .. }
            | ApiError::SessionCompleted(_)
            | ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            log::error!("{self}");
        }
        let body = ErrorBody {
            code: self.code(),
            message: self.to_string(),
        };
        (status, Json(body)).into_response()
    }
}
