use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use mixbo::driver::DriverError;

use crate::wire::{ErrorBody, ErrorDetail, Links, VERSION};

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub links: Option<Links>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            links: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_body", message)
    }

    pub fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session `{id}`"))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn with_links(mut self, links: Links) -> Self {
        self.links = Some(links);
        self
    }
}

impl From<DriverError> for ApiError {
    fn from(e: DriverError) -> Self {
        let msg = e.to_string();
        match e {
            DriverError::PendingEvaluation => Self::new(StatusCode::CONFLICT, "pending_ask", msg),
            DriverError::NoPendingAsk => Self::new(StatusCode::CONFLICT, "no_pending_ask", msg),
            DriverError::PointMismatch => Self::new(StatusCode::CONFLICT, "point_mismatch", msg),
            DriverError::BudgetExhausted => Self::new(StatusCode::GONE, "budget_exhausted", msg),
            DriverError::Arity { .. } => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "arity", msg),
            DriverError::Config(_) | DriverError::Space(_) => Self::bad_request(msg),
            _ => Self::internal(msg),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::error!("{}: {}", self.code, self.message);
        }
        let body = ErrorBody {
            version: VERSION,
            error: ErrorDetail {
                code: self.code.to_string(),
                message: self.message,
            },
            links: self.links,
        };
        (self.status, Json(body)).into_response()
    }
}
