use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use crowdtone_core::OrchestratorError;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Every code the service can return. Clients may match on these.
pub const ERROR_CODES: &[&str] = &[
    "malformed_body",
    "invalid_submission",
    "context_mode_rejected",
    "unknown_task",
    "unknown_assignment",
    "unknown_worker",
    "unqualified_worker",
    "invalid_worker_profile",
    "worker_mismatch",
    "stale_assignment",
    "stage_violation",
    "empty_payload",
    "target_tone_missing_intensity",
    "unchanged_text",
    "not_done",
    "invalid_ballot",
    "pipeline_closed",
    "result_pending",
    "clock_not_adjustable",
    "unauthorized",
    "not_found",
    "consensus_error",
    "corrupt_log",
    "store_error",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub http_status: u16,
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub detail: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        debug_assert!(ERROR_CODES.contains(&code), "unlisted error code {code}");
        Self {
            http_status: status.as_u16(),
            code: code.to_string(),
            message: message.into(),
            detail: Value::Null,
        }
    }

    pub fn with_detail(mut self, detail: impl Serialize) -> Self {
        self.detail = serde_json::to_value(detail).unwrap_or(Value::Null);
        self
    }

    pub fn malformed(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "malformed_body", message)
    }

    pub fn unknown_worker(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_worker", format!("worker {id} has no registered profile"))
    }
}

/// HTTP status for an engine error code.
pub fn status_for(code: &str) -> StatusCode {
    match code {
        "malformed_body" | "invalid_submission" | "invalid_worker_profile" => StatusCode::BAD_REQUEST,
        "unauthorized" => StatusCode::UNAUTHORIZED,
        "unqualified_worker" | "worker_mismatch" => StatusCode::FORBIDDEN,
        "unknown_task" | "unknown_assignment" | "unknown_worker" | "not_found" => StatusCode::NOT_FOUND,
        "stale_assignment" | "pipeline_closed" | "result_pending" | "not_done" | "clock_not_adjustable" => {
            StatusCode::CONFLICT
        }
        "context_mode_rejected" | "stage_violation" | "empty_payload" | "target_tone_missing_intensity"
        | "unchanged_text" | "invalid_ballot" => StatusCode::UNPROCESSABLE_ENTITY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<OrchestratorError> for ApiError {
    fn from(e: OrchestratorError) -> Self {
        let code = e.code();
        Self::new(status_for(code), code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.http_status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engine_errors_map_to_listed_codes() {
        let e: ApiError = OrchestratorError::UnknownTask("ct-000009".into()).into();
        assert_eq!(e.http_status, 404);
        assert_eq!(e.code, "unknown_task");
        for code in ERROR_CODES {
            let s = status_for(code);
            assert!(s.is_client_error() || s.is_server_error(), "{code}");
        }
    }
}
