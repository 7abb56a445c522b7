//! Read-only analytics over the twin: maintenance outcomes, equipment
//! health, staff activity and dashboard series.
//!
//! A window is half-open, `[from, to)`. Job state is evaluated as of `to`.

mod dashboard;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::graph::{Discipline, TwinGraph};
use crate::maintenance::{AssigneeRole, JobOrigin, JobStatus, JobTarget, MaintenanceJob};
use crate::time::Timestamp;

pub use dashboard::{
    dashboard_series, metric_readings, Aggregation, DashboardSeries, DashboardSystem, MetricDef, MetricRegistry, SeriesPoint,
    SystemDef,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("window ends ({to}) before or at its start ({from})")]
    InvertedWindow { from: Timestamp, to: Timestamp },
    #[error("bucket must be positive and no longer than the window, got {0} s")]
    BadBucket(i64),
    #[error("unknown dashboard system {0:?}")]
    UnknownSystem(String),
    #[error("unknown metric {metric:?} for system {system:?}")]
    UnknownMetric { system: String, metric: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReportWindow {
    pub from: Timestamp,
    pub to: Timestamp,
    pub bucket_s: i64,
}

impl ReportWindow {
    pub fn new(from: Timestamp, to: Timestamp, bucket_s: i64) -> Result<Self, ReportError> {
        if from >= to {
            return Err(ReportError::InvertedWindow { from, to });
        }
        let span = to.epoch_seconds() - from.epoch_seconds();
        if bucket_s <= 0 || bucket_s > span {
            return Err(ReportError::BadBucket(bucket_s));
        }
        Ok(Self { from, to, bucket_s })
    }

    /// A window with a single bucket spanning it.
    pub fn span(from: Timestamp, to: Timestamp) -> Result<Self, ReportError> {
        if from >= to {
            return Err(ReportError::InvertedWindow { from, to });
        }
        Self::new(from, to, to.epoch_seconds() - from.epoch_seconds())
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.from <= t && t < self.to
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaintenanceSummary {
    pub from: Timestamp,
    pub to: Timestamp,
    /// Jobs created inside the window.
    pub jobs: u64,
    pub by_status: BTreeMap<JobStatus, u64>,
    pub by_origin: BTreeMap<String, u64>,
    /// Equipment jobs by the target's discipline; space jobs under `space`.
    pub by_discipline: BTreeMap<String, u64>,
    pub by_role: BTreeMap<AssigneeRole, u64>,
    pub transitions: u64,
    pub comments: u64,
    /// Mean hours from creation to first completion, over jobs completed
    /// before the window end. `None` when no job qualifies.
    pub mean_hours_open_to_completed: Option<f64>,
}

fn origin_key(job: &MaintenanceJob) -> &'static str {
    match job.origin {
        JobOrigin::Preventive { .. } => "preventive",
        JobOrigin::Reactive => "reactive",
    }
}

fn discipline_key(graph: &TwinGraph, job: &MaintenanceJob) -> String {
    match &job.target {
        JobTarget::Equipment(id) => graph
            .equipment
            .get(id)
            .map_or_else(|| "unknown".to_string(), |e| e.discipline.to_string()),
        JobTarget::Space(_) => "space".to_string(),
    }
}

pub fn maintenance_summary(graph: &TwinGraph, window: &ReportWindow) -> MaintenanceSummary {
    let mut s = MaintenanceSummary {
        from: window.from,
        to: window.to,
        jobs: 0,
        by_status: JobStatus::ALL.into_iter().map(|st| (st, 0)).collect(),
        by_origin: ["preventive", "reactive"].into_iter().map(|k| (k.to_string(), 0)).collect(),
        by_discipline: Discipline::ALL
            .into_iter()
            .map(|d| d.to_string())
            .chain(["space".to_string()])
            .map(|k| (k, 0))
            .collect(),
        by_role: [AssigneeRole::Technician, AssigneeRole::Custodian].into_iter().map(|r| (r, 0)).collect(),
        transitions: 0,
        comments: 0,
        mean_hours_open_to_completed: None,
    };
    let mut completion_hours = Vec::new();
    for job in graph.jobs.values() {
        s.transitions += job.history.iter().filter(|c| window.contains(c.at)).count() as u64;
        s.comments += job.comments.iter().filter(|c| window.contains(c.at)).count() as u64;
        if !window.contains(job.created_at) {
            continue;
        }
        s.jobs += 1;
        *s.by_status.entry(job.status_at(window.to)).or_default() += 1;
        *s.by_origin.entry(origin_key(job).to_string()).or_default() += 1;
        *s.by_discipline.entry(discipline_key(graph, job)).or_default() += 1;
        *s.by_role.entry(job.assignee_role).or_default() += 1;
        if let Some(done) = job.history.iter().find(|c| c.to == JobStatus::Completed && c.at < window.to) {
            completion_hours.push((done.at.epoch_seconds() - job.created_at.epoch_seconds()) as f64 / 3600.0);
        }
    }
    if !completion_hours.is_empty() {
        s.mean_hours_open_to_completed = Some(completion_hours.iter().sum::<f64>() / completion_hours.len() as f64);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquipmentHealth {
    pub equipment_id: String,
    pub discipline: Discipline,
    pub active_alarm_count: u64,
    pub readings: u64,
    pub readings_out_of_range: u64,
    /// `None` when the equipment has no readings in the window.
    pub out_of_range_fraction: Option<f64>,
    /// Jobs on this equipment that are open or ongoing at the window end.
    pub open_job_count: u64,
}

pub fn equipment_health(graph: &TwinGraph, window: &ReportWindow) -> Vec<EquipmentHealth> {
    let mut open_jobs: BTreeMap<&str, u64> = BTreeMap::new();
    for job in graph.jobs.values().filter(|j| j.created_at < window.to) {
        if let JobTarget::Equipment(id) = &job.target {
            if matches!(job.status_at(window.to), JobStatus::Open | JobStatus::Ongoing) {
                *open_jobs.entry(id.as_str()).or_default() += 1;
            }
        }
    }
    graph
        .equipment
        .values()
        .map(|item| {
            let id = item.augment_id_instance.as_str();
            let (mut readings, mut out, mut alarms) = (0u64, 0u64, 0u64);
            for spec in graph.sensors_of(id) {
                let rule = graph.rule_states.get(&spec.sensor_id).map(|s| &s.rule);
                if let Some(series) = graph.readings.get(&spec.sensor_id) {
                    let lo = series.partition_point(|r| r.at < window.from);
                    let hi = series.partition_point(|r| r.at < window.to);
                    for r in &series[lo..hi] {
                        readings += 1;
                        if rule.is_some_and(|rule| !rule.in_range(r.value)) {
                            out += 1;
                        }
                    }
                }
                alarms += graph.alarms.values().filter(|a| a.sensor_id == spec.sensor_id && a.active_at(window.to)).count() as u64;
            }
            EquipmentHealth {
                equipment_id: id.to_string(),
                discipline: item.discipline,
                active_alarm_count: alarms,
                readings,
                readings_out_of_range: out,
                out_of_range_fraction: (readings > 0).then(|| out as f64 / readings as f64),
                open_job_count: open_jobs.get(id).copied().unwrap_or(0),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StaffActivity {
    pub transitions_performed: u64,
    pub comments_added: u64,
    /// Only `ongoing -> completed` transitions count as completions.
    pub jobs_completed: u64,
}

pub fn staff_activity(graph: &TwinGraph, window: &ReportWindow) -> BTreeMap<String, StaffActivity> {
    let mut out: BTreeMap<String, StaffActivity> = BTreeMap::new();
    for job in graph.jobs.values() {
        for change in job.history.iter().filter(|c| window.contains(c.at)) {
            let entry = out.entry(change.actor.clone()).or_default();
            entry.transitions_performed += 1;
            if change.from == JobStatus::Ongoing && change.to == JobStatus::Completed {
                entry.jobs_completed += 1;
            }
        }
        for comment in job.comments.iter().filter(|c| window.contains(c.at)) {
            out.entry(comment.actor.clone()).or_default().comments_added += 1;
        }
    }
    out
}

/// The three tabular reports together, as served by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullReport {
    pub maintenance: MaintenanceSummary,
    pub health: Vec<EquipmentHealth>,
    pub staff: BTreeMap<String, StaffActivity>,
}

pub fn full_report(graph: &TwinGraph, window: &ReportWindow) -> FullReport {
    FullReport {
        maintenance: maintenance_summary(graph, window),
        health: equipment_health(graph, window),
        staff: staff_activity(graph, window),
    }
}

impl FullReport {
    /// Long-form CSV: one `report,key,metric,value` row per figure.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["report", "key", "metric", "value"]).unwrap();
        let mut row = |report: &str, key: &str, metric: &str, value: String| {
            w.write_record([report, key, metric, value.as_str()]).unwrap();
        };
        let m = &self.maintenance;
        row("maintenance", "all", "jobs", m.jobs.to_string());
        for (k, v) in &m.by_status {
            row("maintenance", "status", k.as_str(), v.to_string());
        }
        for (k, v) in &m.by_origin {
            row("maintenance", "origin", k, v.to_string());
        }
        for (k, v) in &m.by_discipline {
            row("maintenance", "discipline", k, v.to_string());
        }
        row("maintenance", "all", "transitions", m.transitions.to_string());
        row("maintenance", "all", "comments", m.comments.to_string());
        row(
            "maintenance",
            "all",
            "mean_hours_open_to_completed",
            m.mean_hours_open_to_completed.map(|h| h.to_string()).unwrap_or_default(),
        );
        for h in &self.health {
            row("health", &h.equipment_id, "active_alarm_count", h.active_alarm_count.to_string());
            row("health", &h.equipment_id, "readings", h.readings.to_string());
            row(
                "health",
                &h.equipment_id,
                "out_of_range_fraction",
                h.out_of_range_fraction.map(|f| f.to_string()).unwrap_or_default(),
            );
            row("health", &h.equipment_id, "open_job_count", h.open_job_count.to_string());
        }
        for (actor, a) in &self.staff {
            row("staff", actor, "transitions_performed", a.transitions_performed.to_string());
            row("staff", actor, "comments_added", a.comments_added.to_string());
            row("staff", actor, "jobs_completed", a.jobs_completed.to_string());
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}
