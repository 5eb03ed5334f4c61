//! Mapping of failures to HTTP status codes and JSON error bodies.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use mplab_core::session::{RunError, SessionError};

use crate::content::Content;
use crate::store::StoreError;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("missing or unknown token")]
    Unauthorized,
    #[error("{0}")]
    Forbidden(&'static str),
    #[error("{0} not found")]
    NotFound(String),
    #[error("{message}")]
    Conflict { code: &'static str, message: String },
    #[error("{message}")]
    Invalid { code: &'static str, message: String, field: Option<String> },
    #[error("session: {source}")]
    Session { source: SessionError, message: String },
    #[error("storage: {0}")]
    Store(#[from] StoreError),
    #[error("{0}")]
    Internal(String),
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub code: String,
    /// Text suitable for showing to the subject.
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    /// Endpoint that accepts input in the current stage.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub next: Option<String>,
}

impl ApiError {
    /// A session rejection with its subject-facing wording.
    pub fn session(source: SessionError, content: &Content) -> Self {
        let vars: Vec<(&str, String)> = match &source {
            SessionError::SecondSwitch { row } | SessionError::DuplicateRow { row } => vec![("row", row.to_string())],
            SessionError::OutOfOrderRow { expected, .. } => vec![("expected", expected.to_string())],
            SessionError::Questionnaire { field, .. } => vec![("field", field.to_string())],
            _ => Vec::new(),
        };
        let message = content.error(source.code(), &vars, &source.to_string());
        ApiError::Session { source, message }
    }

    pub fn run(err: RunError, content: &Content) -> Self {
        match err {
            RunError::DuplicateSubject(_) => ApiError::Conflict { code: "duplicate_subject", message: err.to_string() },
            RunError::Closed => ApiError::Conflict { code: "run_closed", message: err.to_string() },
            RunError::Full(_) => ApiError::Conflict { code: "run_full", message: err.to_string() },
            RunError::UnknownSubject(s) => ApiError::NotFound(format!("subject {s}")),
            RunError::Session(e) => ApiError::session(e, content),
            RunError::Ingest(e) => ApiError::Internal(e.to_string()),
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Unauthorized => StatusCode::UNAUTHORIZED,
            ApiError::Forbidden(_) => StatusCode::FORBIDDEN,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict { .. } => StatusCode::CONFLICT,
            ApiError::Invalid { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Session { source, .. } => match source {
                SessionError::WrongStage(_)
                | SessionError::OutOfOrderTask { .. }
                | SessionError::DuplicateRow { .. }
                | SessionError::OutOfOrderRow { .. }
                | SessionError::NoQuestionnaire => StatusCode::CONFLICT,
                SessionError::SecondSwitch { .. }
                | SessionError::WrongInput { .. }
                | SessionError::DecisionRange(_)
                | SessionError::RollRange { .. }
                | SessionError::MissingRoll(_)
                | SessionError::Questionnaire { .. } => StatusCode::UNPROCESSABLE_ENTITY,
                SessionError::Config(_) | SessionError::Replay { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            },
            ApiError::Store(_) | ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn body(&self) -> ErrorBody {
        let mut b = ErrorBody {
            code: String::new(),
            message: self.to_string(),
            row: None,
            field: None,
            expected: None,
            stage: None,
            next: None,
        };
        b.code = match self {
            ApiError::Unauthorized => "unauthorized".into(),
            ApiError::Forbidden(_) => "forbidden".into(),
            ApiError::NotFound(_) => "not_found".into(),
            ApiError::Conflict { code, .. } => (*code).into(),
            ApiError::Invalid { code, field, .. } => {
                b.field = field.clone();
                (*code).into()
            }
            ApiError::Session { source, message } => {
                b.message = message.clone();
                match source {
                    SessionError::SecondSwitch { row } | SessionError::DuplicateRow { row } => b.row = Some(*row),
                    SessionError::OutOfOrderRow { expected, got } => {
                        b.row = Some(*got);
                        b.expected = Some(*expected);
                    }
                    SessionError::OutOfOrderTask { expected, .. } => b.expected = Some(*expected as usize),
                    SessionError::Questionnaire { field, .. } => b.field = Some(field.to_string()),
                    SessionError::RollRange { what, .. } | SessionError::MissingRoll(what) => {
                        b.field = Some((*what).into())
                    }
                    SessionError::WrongStage(stage) => {
                        b.stage = Some(crate::api::stage_name(*stage).into());
                        b.next = crate::api::next_step(*stage).map(str::to_string);
                    }
                    _ => {}
                }
                source.code().into()
            }
            ApiError::Store(_) | ApiError::Internal(_) => "internal".into(),
        };
        b
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        (status, Json(json!(self.body()))).into_response()
    }
}
