use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};

use hpn_core::dss::DssError;
use hpn_core::repository::RepoError;
use hpn_core::solver::SolveError;
use hpn_core::{ComposeError, ScenarioError, SchemaError, SimulationError, Violation};

/// An error response: status plus a JSON body with at least `error` and
/// `message`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: json!({ "error": error, "message": message.into() }),
        }
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", format!("{what} `{id}` not found"))
    }

    fn with(mut self, key: &str, value: Value) -> Self {
        self.body[key] = value;
        self
    }

    fn invalid(violations: &[Violation]) -> Self {
        Self::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "ValidationFailed",
            format!("{} violations", violations.len()),
        )
        .with("violations", json!(violations))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<SchemaError> for ApiError {
    fn from(e: SchemaError) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "Schema", e.message.clone()).with("path", json!(e.path))
    }
}

impl From<RepoError> for ApiError {
    fn from(e: RepoError) -> Self {
        match e {
            RepoError::NotFound { kind, id } => ApiError::not_found(&kind.to_string(), id.as_str()),
            RepoError::ConflictingId { .. } => ApiError::new(StatusCode::CONFLICT, "ConflictingId", e.to_string()),
            RepoError::InvalidId(_) => ApiError::new(StatusCode::BAD_REQUEST, "InvalidId", e.to_string()),
            RepoError::Invalid(violations) => ApiError::invalid(&violations),
            RepoError::Schema(e) => e.into(),
            RepoError::Io(e) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Io", e.to_string()),
        }
    }
}

impl From<ScenarioError> for ApiError {
    fn from(e: ScenarioError) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidScenario", e.to_string())
    }
}

impl From<DssError> for ApiError {
    fn from(e: DssError) -> Self {
        match e {
            DssError::InvalidNet(violations) => ApiError::invalid(&violations),
            other => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidRequest", other.to_string()),
        }
    }
}

impl From<ComposeError> for ApiError {
    fn from(e: ComposeError) -> Self {
        match e {
            ComposeError::Invalid(violations) => ApiError::invalid(&violations),
            other => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "Compose", other.to_string()),
        }
    }
}

impl From<SimulationError> for ApiError {
    fn from(e: SimulationError) -> Self {
        match &e {
            SimulationError::Scenario(s) => s.clone().into(),
            SimulationError::InvalidNet(violations) => ApiError::invalid(violations),
            _ => {
                let diagnostic = diagnostic(&e);
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.kind(), e.to_string())
                    .with("diagnostic", diagnostic)
            }
        }
    }
}

fn diagnostic(e: &SimulationError) -> Value {
    match e {
        SimulationError::Solve { time, source } => match source {
            SolveError::NonConvergence { iterations, previous, last } => json!({
                "time": time,
                "iterations": iterations,
                "previous": pairs(previous),
                "last": pairs(last),
            }),
            other => json!({ "time": time, "detail": other.to_string() }),
        },
        SimulationError::LivelockDetected { phases } => json!({ "phases": phases }),
        SimulationError::UnstableDiscreteMarking { transition, time } => {
            json!({ "transition": transition, "time": time })
        }
        _ => Value::Null,
    }
}

fn pairs(speeds: &[(hpn_core::Id, f64)]) -> Value {
    speeds
        .iter()
        .map(|(id, v)| (id.to_string(), json!(v)))
        .collect::<serde_json::Map<_, _>>()
        .into()
}
