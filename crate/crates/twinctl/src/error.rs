use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use twin_core::alarms::AlarmError;
use twin_core::graph::GraphError;
use twin_core::ingest::IngestError;
use twin_core::maintenance::MaintenanceError;
use twin_core::reporting::ReportError;
use twin_core::telemetry::TelemetryError;

/// JSON error body: `{"error": <code>, "message": <text>}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    message: &'a str,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { error: self.code, message: &self.message };
        (self.status, Json(body)).into_response()
    }
}

const CONFLICT: StatusCode = StatusCode::CONFLICT;
const UNPROCESSABLE: StatusCode = StatusCode::UNPROCESSABLE_ENTITY;

impl From<GraphError> for ApiError {
    fn from(e: GraphError) -> Self {
        let message = e.to_string();
        let (status, code) = match e {
            GraphError::MalformedCategory(_) => (UNPROCESSABLE, "malformed_category"),
            GraphError::MalformedCode(_) => (UNPROCESSABLE, "malformed_code"),
            GraphError::EmptyTag => (UNPROCESSABLE, "empty_tag"),
            GraphError::DuplicateTagConflict { .. } => (CONFLICT, "duplicate_tag_conflict"),
            GraphError::UnknownSpace(_) => (UNPROCESSABLE, "unknown_space"),
            GraphError::UnknownEquipment(_) => (StatusCode::NOT_FOUND, "unknown_equipment"),
            GraphError::UnknownSensor(_) => (StatusCode::NOT_FOUND, "unknown_sensor"),
            GraphError::UnknownAlarm(_) => (StatusCode::NOT_FOUND, "unknown_alarm"),
            GraphError::UnknownPolicy(_) => (StatusCode::NOT_FOUND, "unknown_policy"),
            GraphError::UnknownJob(_) => (StatusCode::NOT_FOUND, "unknown_job"),
            GraphError::DuplicateId(_) => (CONFLICT, "duplicate_id"),
            GraphError::KindAlreadyBound { .. } => (CONFLICT, "kind_already_bound"),
            GraphError::Invalid(_) => (UNPROCESSABLE, "invalid"),
            GraphError::GapInSequence { .. } | GraphError::UnknownEventKind(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "corrupt_log")
            }
        };
        Self::new(status, code, message)
    }
}

impl From<MaintenanceError> for ApiError {
    fn from(e: MaintenanceError) -> Self {
        let message = e.to_string();
        let (status, code) = match e {
            MaintenanceError::Graph(g) => return g.into(),
            MaintenanceError::BadFrequency(_) => (UNPROCESSABLE, "bad_frequency"),
            MaintenanceError::UnresolvedTarget(_) => (UNPROCESSABLE, "unresolved_target"),
            MaintenanceError::InvertedHorizon { .. } => (UNPROCESSABLE, "inverted_horizon"),
            MaintenanceError::EmptyDescription => (UNPROCESSABLE, "empty_description"),
            MaintenanceError::EmptyComment => (UNPROCESSABLE, "empty_comment"),
            MaintenanceError::IllegalTransition { .. } => (CONFLICT, "illegal_transition"),
            MaintenanceError::UnknownJob(_) => (StatusCode::NOT_FOUND, "unknown_job"),
            MaintenanceError::UnknownPolicy(_) => (StatusCode::NOT_FOUND, "unknown_policy"),
            MaintenanceError::PolicyConflict(_) => (CONFLICT, "policy_conflict"),
        };
        Self::new(status, code, message)
    }
}

impl From<TelemetryError> for ApiError {
    fn from(e: TelemetryError) -> Self {
        let message = e.to_string();
        let (status, code) = match e {
            TelemetryError::Graph(g) => return g.into(),
            TelemetryError::UnknownEquipment(_) => (StatusCode::NOT_FOUND, "unknown_equipment"),
            TelemetryError::IntervalOutOfRange(_) => (UNPROCESSABLE, "interval_out_of_range"),
            TelemetryError::InvalidSpec(_) => (UNPROCESSABLE, "invalid_spec"),
            TelemetryError::OffGridTimestamp { .. } => (UNPROCESSABLE, "off_grid_timestamp"),
            TelemetryError::NoSensors => (UNPROCESSABLE, "no_sensors"),
            TelemetryError::UnboundSensor(_) => (StatusCode::NOT_FOUND, "unbound_sensor"),
            TelemetryError::MalformedPayload(_) => (StatusCode::BAD_REQUEST, "malformed_payload"),
            TelemetryError::UnitMismatch { .. } => (UNPROCESSABLE, "unit_mismatch"),
        };
        Self::new(status, code, message)
    }
}

impl From<AlarmError> for ApiError {
    fn from(e: AlarmError) -> Self {
        let message = e.to_string();
        let (status, code) = match e {
            AlarmError::Graph(g) => return g.into(),
            AlarmError::UnknownAlarm(_) => (StatusCode::NOT_FOUND, "unknown_alarm"),
            AlarmError::IllegalState { .. } => (CONFLICT, "illegal_alarm_state"),
            AlarmError::InvalidRule(_) | AlarmError::SensorMismatch { .. } => (UNPROCESSABLE, "invalid_rule"),
        };
        Self::new(status, code, message)
    }
}

impl From<ReportError> for ApiError {
    fn from(e: ReportError) -> Self {
        let message = e.to_string();
        let (status, code) = match e {
            ReportError::InvertedWindow { .. } => (StatusCode::BAD_REQUEST, "inverted_window"),
            ReportError::BadBucket(_) => (StatusCode::BAD_REQUEST, "bad_bucket"),
            ReportError::UnknownSystem(_) => (StatusCode::NOT_FOUND, "unknown_system"),
            ReportError::UnknownMetric { .. } => (StatusCode::NOT_FOUND, "unknown_metric"),
        };
        Self::new(status, code, message)
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Graph(g) => g.into(),
            IngestError::IdCollision(_) => Self::new(CONFLICT, "id_collision", e.to_string()),
            other => Self::new(UNPROCESSABLE, "ingest", other.to_string()),
        }
    }
}
