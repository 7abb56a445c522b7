use std::collections::{BTreeMap, BTreeSet};

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use twin_core::alarms::{AlarmRecord, AlarmRule};
use twin_core::graph::{Discipline, DocumentKind, DocumentMeta, EquipmentItem, Selector, SpaceRecord, TwinStore};
use twin_core::maintenance::{AssigneeRole, JobFilter, JobStatus, JobTarget, MaintenanceJob, MaintenancePolicy, Resource};
use twin_core::reporting::{self, DashboardSeries, DashboardSystem, ReportWindow};
use twin_core::telemetry::{SensorKind, SensorReading, SensorSpec, SimulationWindow};
use twin_core::Timestamp;

use crate::app::SharedApp;
use crate::error::ApiError;
use crate::stream;

type ApiResult<T> = Result<Json<T>, ApiError>;
type Created<T> = Result<(StatusCode, Json<T>), ApiError>;

/// JSON body extractor whose rejections use the API error shape.
pub struct Body<T>(pub T);

impl<S, T> FromRequest<S> for Body<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e @ JsonRejection::JsonDataError(_)) => Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_body", e.body_text())),
            Err(e) => Err(ApiError::bad_request("malformed_body", e.body_text())),
        }
    }
}

/// Parses a snake_case enum value the same way the JSON bodies do.
pub fn parse_enum<T: DeserializeOwned>(field: &str, value: &str) -> Result<T, ApiError> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| ApiError::bad_request("bad_query", format!("invalid {field} {value:?}")))
}

/// Accepts RFC 3339 instants or bare `YYYY-MM-DD` dates (midnight UTC).
pub fn parse_instant(field: &str, value: &str) -> Result<Timestamp, ApiError> {
    if let Ok(date) = value.parse::<chrono::NaiveDate>() {
        return Ok(Timestamp::at_midnight(date));
    }
    value
        .parse()
        .map_err(|_| ApiError::bad_request("bad_query", format!("invalid {field} {value:?}: expected RFC 3339 or YYYY-MM-DD")))
}

fn parse_date(field: &str, value: &str) -> Result<chrono::NaiveDate, ApiError> {
    value.parse().map_err(|_| ApiError::bad_request("bad_query", format!("invalid {field} {value:?}: expected YYYY-MM-DD")))
}

pub fn router(app: SharedApp) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/spaces", get(list_spaces).post(upsert_space))
        .route("/spaces/{tag}", get(get_space))
        .route("/equipment", get(list_equipment).post(upsert_equipment))
        .route("/equipment/{id}", get(get_equipment))
        .route("/equipment/{id}/documents", get(list_documents).post(attach_document))
        .route("/equipment/{id}/readings", get(list_readings))
        .route("/sensors", get(list_sensors).post(bind_sensor))
        .route("/alarms", get(list_alarms))
        .route("/alarms/{id}/ack", post(ack_alarm))
        .route("/policies", get(list_policies).post(create_policy))
        .route("/jobs", get(list_jobs).post(create_job))
        .route("/jobs/generate", post(generate_jobs))
        .route("/jobs/{id}", get(get_job))
        .route("/jobs/{id}/transition", post(transition_job))
        .route("/jobs/{id}/comments", get(list_comments).post(add_comment))
        .route("/reports", get(full_report))
        .route("/reports/maintenance", get(maintenance_report))
        .route("/reports/health", get(health_report))
        .route("/reports/staff", get(staff_report))
        .route("/dashboards", get(list_dashboards))
        .route("/dashboards/{system}", get(dashboard))
        .route("/simulate", post(simulate))
        .route("/stream", get(stream::stream_readings))
        .with_state(app)
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    building_id: String,
    last_seq: u64,
}

async fn health(State(app): State<SharedApp>) -> Json<Health> {
    Json(Health { status: "ok", building_id: app.building_id().to_string(), last_seq: app.read(|s| s.last_seq()) })
}

// Spaces

async fn list_spaces(State(app): State<SharedApp>) -> Json<Vec<SpaceRecord>> {
    Json(app.read(|s| s.graph().spaces.values().cloned().collect()))
}

async fn get_space(State(app): State<SharedApp>, Path(tag): Path<String>) -> ApiResult<SpaceRecord> {
    app.read(|s| s.graph().spaces.get(&tag).cloned())
        .map(Json)
        .ok_or_else(|| ApiError::not_found("unknown_space", format!("unknown space {tag:?}")))
}

#[derive(Deserialize)]
struct OverwriteQuery {
    #[serde(default)]
    overwrite: bool,
}

async fn upsert_space(
    State(app): State<SharedApp>,
    Query(q): Query<OverwriteQuery>,
    Body(record): Body<SpaceRecord>,
) -> ApiResult<SpaceRecord> {
    let at = app.now();
    app.write(|s| {
        let tag = s.upsert_space(at, record, q.overwrite)?;
        s.assign_augment_ids(at)?;
        Ok(Json(s.graph().spaces[&tag].clone()))
    })
}

// Equipment

#[derive(Deserialize)]
struct EquipmentQuery {
    discipline: Option<String>,
    room: Option<String>,
    prefix: Option<String>,
}

async fn list_equipment(State(app): State<SharedApp>, Query(q): Query<EquipmentQuery>) -> ApiResult<Vec<EquipmentItem>> {
    let mut selectors = Vec::new();
    if let Some(d) = &q.discipline {
        selectors.push(Selector::ByDiscipline(parse_enum::<Discipline>("discipline", d)?));
    }
    if let Some(r) = &q.room {
        selectors.push(Selector::ByRoomTag(r.clone()));
    }
    if let Some(p) = &q.prefix {
        selectors.push(Selector::ByOmniclassPrefix(p.clone()));
    }
    Ok(Json(app.read(|s| {
        let g = s.graph();
        let hits: Vec<BTreeSet<&str>> =
            selectors.iter().map(|sel| g.query(sel).into_iter().map(|m| m.augment_id_instance.as_str()).collect()).collect();
        g.equipment.values().filter(|e| hits.iter().all(|h| h.contains(e.augment_id_instance.as_str()))).cloned().collect()
    })))
}

#[derive(Serialize)]
struct EquipmentDetail {
    item: EquipmentItem,
    documents: Vec<DocumentMeta>,
    sensors: Vec<SensorSpec>,
    latest: BTreeMap<SensorKind, SensorReading>,
    active_alarms: Vec<AlarmRecord>,
    open_jobs: Vec<String>,
}

fn unknown_equipment(id: &str) -> ApiError {
    ApiError::not_found("unknown_equipment", format!("unknown equipment {id:?}"))
}

async fn get_equipment(State(app): State<SharedApp>, Path(id): Path<String>) -> ApiResult<EquipmentDetail> {
    app.read(|s| {
        let g = s.graph();
        let item = g.equipment.get(&id).ok_or_else(|| unknown_equipment(&id))?;
        let alarms = g.active_alarms(&twin_core::alarms::AlarmFilter::ByEquipment(id.clone()));
        Ok(Json(EquipmentDetail {
            item: item.clone(),
            documents: g.documents_of(&id).unwrap_or_default().into_iter().cloned().collect(),
            sensors: g.sensors_of(&id).cloned().collect(),
            latest: s.latest(&id)?,
            active_alarms: alarms.into_iter().cloned().collect(),
            open_jobs: g
                .jobs
                .values()
                .filter(|j| j.target == JobTarget::Equipment(id.clone()))
                .filter(|j| matches!(j.status, JobStatus::Open | JobStatus::Ongoing))
                .map(|j| j.job_id.clone())
                .collect(),
        }))
    })
}

/// Stores an item and assigns its AugmentIDs at once, so no item stays
/// pending between requests.
async fn upsert_equipment(State(app): State<SharedApp>, Body(record): Body<EquipmentItem>) -> Created<EquipmentItem> {
    let at = app.now();
    app.write(|s| {
        let before: Vec<String> = s.graph().equipment.keys().cloned().collect();
        let key = record.content_key();
        let outcome = s.upsert_equipment(at, record)?;
        if let Some(m) = &outcome.discipline_mismatch {
            tracing::warn!(declared = %m.declared, implied = %m.implied, "discipline mismatch");
        }
        s.assign_augment_ids(at)?;
        let g = s.graph();
        let stored = if outcome.augment_id_instance.is_empty() {
            g.equipment
                .values()
                .find(|e| e.content_key() == key && !before.contains(&e.augment_id_instance))
                .or_else(|| g.equipment.values().find(|e| e.content_key() == key))
        } else {
            g.equipment.get(&outcome.augment_id_instance)
        };
        let stored = stored.cloned().ok_or_else(|| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "lost_record", "stored item not found"))?;
        let status = if outcome.committed { StatusCode::CREATED } else { StatusCode::OK };
        Ok((status, Json(stored)))
    })
}

async fn list_documents(State(app): State<SharedApp>, Path(id): Path<String>) -> ApiResult<Vec<DocumentMeta>> {
    app.read(|s| s.graph().documents_of(&id).map(|d| Json(d.into_iter().cloned().collect())))
        .ok_or_else(|| unknown_equipment(&id))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentRequest {
    #[serde(default)]
    doc_id: String,
    kind: DocumentKind,
    title: String,
    #[serde(default)]
    uri_or_path: String,
    uploaded_at: Option<Timestamp>,
}

async fn attach_document(State(app): State<SharedApp>, Path(id): Path<String>, Body(req): Body<DocumentRequest>) -> Created<DocumentMeta> {
    let at = app.now();
    let meta = DocumentMeta {
        doc_id: req.doc_id,
        kind: req.kind,
        title: req.title,
        uri_or_path: req.uri_or_path,
        uploaded_at: req.uploaded_at.unwrap_or(at),
    };
    app.write(|s| {
        let doc_id = s.attach_document(at, &id, meta)?;
        Ok((StatusCode::CREATED, Json(s.graph().documents[&doc_id].clone())))
    })
}

#[derive(Deserialize)]
struct WindowQuery {
    from: Option<String>,
    to: Option<String>,
    bucket: Option<i64>,
    metric: Option<String>,
}

/// Window bounds from the query, defaulting to the span of the event log so
/// responses depend only on stored state.
fn bounds(store: &TwinStore, q: &WindowQuery) -> Result<(Timestamp, Timestamp), ApiError> {
    let events = store.events();
    let first = events.iter().map(|e| e.at).min().unwrap_or(Timestamp::from_epoch_seconds(0));
    let last = events.iter().map(|e| e.at).max().unwrap_or(first);
    let from = q.from.as_deref().map(|v| parse_instant("from", v)).transpose()?.unwrap_or(first);
    let to = q.to.as_deref().map(|v| parse_instant("to", v)).transpose()?.unwrap_or(last.plus_seconds(1));
    Ok((from, to))
}

fn window(store: &TwinStore, q: &WindowQuery) -> Result<ReportWindow, ApiError> {
    let (from, to) = bounds(store, q)?;
    match q.bucket {
        Some(b) => Ok(ReportWindow::new(from, to, b)?),
        None => Ok(ReportWindow::span(from, to)?),
    }
}

async fn list_readings(State(app): State<SharedApp>, Path(id): Path<String>, Query(q): Query<WindowQuery>) -> ApiResult<Vec<SensorReading>> {
    app.read(|s| {
        let g = s.graph();
        if !g.equipment.contains_key(&id) {
            return Err(unknown_equipment(&id));
        }
        let w = window(s, &q)?;
        let mut out: Vec<SensorReading> = g
            .sensors_of(&id)
            .filter_map(|spec| g.readings.get(&spec.sensor_id))
            .flat_map(|series| series.iter().filter(|r| w.contains(r.at)).cloned())
            .collect();
        out.sort_by(|a, b| (a.at, &a.sensor_id).cmp(&(b.at, &b.sensor_id)));
        Ok(Json(out))
    })
}

// Sensors and alarms

#[derive(Deserialize)]
struct SensorQuery {
    equipment: Option<String>,
    kind: Option<String>,
}

async fn list_sensors(State(app): State<SharedApp>, Query(q): Query<SensorQuery>) -> ApiResult<Vec<SensorSpec>> {
    let kind = q.kind.as_deref().map(|k| parse_enum::<SensorKind>("kind", k)).transpose()?;
    Ok(Json(app.read(|s| {
        s.graph()
            .sensors
            .values()
            .filter(|spec| q.equipment.as_ref().is_none_or(|e| &spec.bound_equipment == e))
            .filter(|spec| kind.is_none_or(|k| spec.kind == k))
            .cloned()
            .collect()
    })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BindRequest {
    spec: SensorSpec,
    rule: Option<AlarmRule>,
}

async fn bind_sensor(State(app): State<SharedApp>, Body(req): Body<BindRequest>) -> Created<SensorSpec> {
    let at = app.now();
    let defaults = app.defaults().alarm;
    app.write(|s| {
        let id = req.spec.sensor_id.clone();
        s.bind_sensor(at, req.spec, req.rule, &defaults)?;
        Ok((StatusCode::CREATED, Json(s.graph().sensors[&id].clone())))
    })
}

#[derive(Deserialize)]
struct AlarmQuery {
    #[serde(default)]
    active: bool,
    equipment: Option<String>,
    discipline: Option<String>,
}

async fn list_alarms(State(app): State<SharedApp>, Query(q): Query<AlarmQuery>) -> ApiResult<Vec<AlarmRecord>> {
    let discipline = q.discipline.as_deref().map(|d| parse_enum::<Discipline>("discipline", d)).transpose()?;
    Ok(Json(app.read(|s| {
        let g = s.graph();
        let mut out: Vec<AlarmRecord> = g
            .alarms
            .values()
            .filter(|a| !q.active || a.is_active())
            .filter(|a| {
                let eq = g.equipment_of_sensor(&a.sensor_id);
                q.equipment.as_ref().is_none_or(|id| eq.is_some_and(|e| &e.augment_id_instance == id))
                    && discipline.is_none_or(|d| eq.is_some_and(|e| e.discipline == d))
            })
            .cloned()
            .collect();
        out.sort_by(|a, b| (a.raised_at, &a.alarm_id).cmp(&(b.raised_at, &b.alarm_id)));
        out
    })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ActorRequest {
    actor: String,
}

async fn ack_alarm(State(app): State<SharedApp>, Path(id): Path<String>, Body(req): Body<ActorRequest>) -> ApiResult<AlarmRecord> {
    let at = app.now();
    Ok(Json(app.write(|s| s.acknowledge(at, &id, &req.actor))?))
}

// Maintenance

async fn list_policies(State(app): State<SharedApp>) -> Json<Vec<MaintenancePolicy>> {
    Json(app.read(|s| s.graph().policies.values().cloned().collect()))
}

async fn create_policy(State(app): State<SharedApp>, Body(policy): Body<MaintenancePolicy>) -> Created<MaintenancePolicy> {
    let at = app.now();
    app.write(|s| {
        let id = s.create_policy(at, policy)?;
        Ok((StatusCode::CREATED, Json(s.graph().policies[&id].clone())))
    })
}

#[derive(Deserialize)]
struct JobQuery {
    status: Option<String>,
    role: Option<String>,
    target: Option<String>,
}

async fn list_jobs(State(app): State<SharedApp>, Query(q): Query<JobQuery>) -> ApiResult<Vec<MaintenanceJob>> {
    let filter = JobFilter {
        status: q.status.as_deref().map(|v| parse_enum::<JobStatus>("status", v)).transpose()?,
        role: q.role.as_deref().map(|v| parse_enum::<AssigneeRole>("role", v)).transpose()?,
        target: q.target.clone(),
    };
    Ok(Json(app.read(|s| s.jobs(&filter).into_iter().cloned().collect())))
}

async fn get_job(State(app): State<SharedApp>, Path(id): Path<String>) -> ApiResult<MaintenanceJob> {
    app.read(|s| s.graph().jobs.get(&id).cloned())
        .map(Json)
        .ok_or_else(|| ApiError::not_found("unknown_job", format!("unknown job {id:?}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JobRequest {
    target: JobTarget,
    description: String,
    #[serde(default)]
    resources: Vec<Resource>,
    assignee: Option<String>,
}

async fn create_job(State(app): State<SharedApp>, Body(req): Body<JobRequest>) -> Created<MaintenanceJob> {
    let at = app.now();
    let job = app.write(|s| s.create_reactive_job(at, req.target, &req.description, req.resources, req.assignee))?;
    Ok((StatusCode::CREATED, Json(job)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionRequest {
    to: JobStatus,
    actor: String,
    comment: Option<String>,
}

async fn transition_job(State(app): State<SharedApp>, Path(id): Path<String>, Body(req): Body<TransitionRequest>) -> ApiResult<MaintenanceJob> {
    let at = app.now();
    Ok(Json(app.write(|s| s.transition(at, &id, req.to, &req.actor, req.comment.as_deref()))?))
}

async fn list_comments(State(app): State<SharedApp>, Path(id): Path<String>) -> ApiResult<Vec<twin_core::maintenance::Comment>> {
    app.read(|s| s.graph().jobs.get(&id).map(|j| Json(j.comments.clone())))
        .ok_or_else(|| ApiError::not_found("unknown_job", format!("unknown job {id:?}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CommentRequest {
    actor: String,
    text: String,
}

async fn add_comment(State(app): State<SharedApp>, Path(id): Path<String>, Body(req): Body<CommentRequest>) -> Created<MaintenanceJob> {
    let at = app.now();
    let job = app.write(|s| s.add_comment(at, &id, &req.actor, &req.text))?;
    Ok((StatusCode::CREATED, Json(job)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateRequest {
    from: String,
    to: String,
    policy_id: Option<String>,
}

#[derive(Serialize)]
struct GenerateResponse {
    created: usize,
    jobs: Vec<MaintenanceJob>,
}

async fn generate_jobs(State(app): State<SharedApp>, Body(req): Body<GenerateRequest>) -> ApiResult<GenerateResponse> {
    let (from, to) = (parse_date("from", &req.from)?, parse_date("to", &req.to)?);
    let at = app.now();
    app.write(|s| {
        let before = s.graph().jobs.len();
        let ids: Vec<String> = match &req.policy_id {
            Some(id) => vec![id.clone()],
            None => s.graph().policies.keys().cloned().collect(),
        };
        let mut jobs = Vec::new();
        for id in ids {
            jobs.extend(s.generate_jobs(at, &id, from, to)?);
        }
        Ok(Json(GenerateResponse { created: s.graph().jobs.len() - before, jobs }))
    })
}

// Reports and dashboards

async fn full_report(State(app): State<SharedApp>, Query(q): Query<WindowQuery>) -> ApiResult<reporting::FullReport> {
    app.read(|s| Ok(Json(reporting::full_report(s.graph(), &window(s, &q)?))))
}

async fn maintenance_report(State(app): State<SharedApp>, Query(q): Query<WindowQuery>) -> ApiResult<reporting::MaintenanceSummary> {
    app.read(|s| Ok(Json(reporting::maintenance_summary(s.graph(), &window(s, &q)?))))
}

async fn health_report(State(app): State<SharedApp>, Query(q): Query<WindowQuery>) -> ApiResult<Vec<reporting::EquipmentHealth>> {
    app.read(|s| Ok(Json(reporting::equipment_health(s.graph(), &window(s, &q)?))))
}

async fn staff_report(
    State(app): State<SharedApp>,
    Query(q): Query<WindowQuery>,
) -> ApiResult<BTreeMap<String, reporting::StaffActivity>> {
    app.read(|s| Ok(Json(reporting::staff_activity(s.graph(), &window(s, &q)?))))
}

#[derive(Serialize)]
struct DashboardIndexEntry {
    system: DashboardSystem,
    title: String,
    metrics: Vec<String>,
}

async fn list_dashboards(State(app): State<SharedApp>) -> Json<Vec<DashboardIndexEntry>> {
    Json(
        app.registry()
            .systems
            .iter()
            .map(|(system, def)| DashboardIndexEntry {
                system: *system,
                title: def.title.clone(),
                metrics: def.metrics.iter().map(|m| m.metric.clone()).collect(),
            })
            .collect(),
    )
}

#[derive(Serialize)]
pub struct Dashboard {
    pub system: DashboardSystem,
    pub title: String,
    pub units_note: String,
    pub series: Vec<DashboardSeries>,
}

/// Default bucket: an hour, or the whole window when shorter.
const DEFAULT_BUCKET_S: i64 = 3600;

async fn dashboard(State(app): State<SharedApp>, Path(system): Path<String>, Query(q): Query<WindowQuery>) -> ApiResult<Dashboard> {
    let system: DashboardSystem = system.parse()?;
    let registry = app.registry();
    let def = registry.system(system)?;
    let metrics: Vec<&str> = match &q.metric {
        Some(m) => vec![registry.metric(system, m)?.metric.as_str()],
        None => def.metrics.iter().map(|m| m.metric.as_str()).collect(),
    };
    app.read(|s| {
        let (from, to) = bounds(s, &q)?;
        let span = to.epoch_seconds() - from.epoch_seconds();
        let w = ReportWindow::new(from, to, q.bucket.unwrap_or(DEFAULT_BUCKET_S.min(span).max(1)))?;
        let series = metrics
            .iter()
            .map(|m| reporting::dashboard_series(s.graph(), registry, system, m, &w))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Json(Dashboard { system, title: def.title.clone(), units_note: registry.units_note.clone(), series }))
    })
}

// Simulation

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateRequest {
    seed: u64,
    hours: f64,
    start: Option<Timestamp>,
    speedup: Option<f64>,
}

pub const DEFAULT_SIMULATION_START: &str = "2024-03-01T00:00:00Z";

async fn simulate(State(app): State<SharedApp>, Body(req): Body<SimulateRequest>) -> ApiResult<twin_core::telemetry::SimulationSummary> {
    if !(req.hours > 0.0 && req.hours.is_finite()) {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "bad_hours", "hours must be positive"));
    }
    let start = req.start.unwrap_or_else(|| DEFAULT_SIMULATION_START.parse().unwrap());
    let window = SimulationWindow::hours(start, req.hours);
    let summary = tokio::task::spawn_blocking(move || app.simulate(req.seed, window, req.speedup))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "simulation_panicked", e.to_string()))??;
    Ok(Json(summary))
}
