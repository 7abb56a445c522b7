//! The twin graph: spaces, equipment, sensors, documents and everything
//! hanging off them, rebuilt deterministically from an append-only event log.

mod event;
mod ops;
mod store;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::alarms::{AlarmRecord, AlarmState, RuleState};
use crate::maintenance::{JobTarget, MaintenanceJob, MaintenancePolicy, PolicyTarget};
use crate::omniclass::{OmniclassCode, OmniclassTable};
use crate::telemetry::{SensorKind, SensorReading, SensorSpec};
use crate::time::Timestamp;

pub use event::{EventBody, EventKind, TwinEvent};
pub use ops::{discipline_mismatch, DisciplineMismatch, EquipmentUpsert};
pub use store::{read_log, replay, replay_onto, LogError, Snapshot, TwinStore, SNAPSHOT_SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discipline {
    Mechanical,
    Electrical,
    Plumbing,
    Conveying,
    Communication,
}

impl Discipline {
    pub const ALL: [Discipline; 5] = [
        Self::Mechanical,
        Self::Electrical,
        Self::Plumbing,
        Self::Conveying,
        Self::Communication,
    ];

    pub const fn as_str(self) -> &'static str {
        match self {
            Self::Mechanical => "mechanical",
            Self::Electrical => "electrical",
            Self::Plumbing => "plumbing",
            Self::Conveying => "conveying",
            Self::Communication => "communication",
        }
    }
}

impl fmt::Display for Discipline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Discipline {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown discipline {s:?}"))
    }
}

/// A room, keyed by its unique tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceRecord {
    pub room_category: OmniclassCode,
    pub room_name: String,
    pub room_tag: String,
    #[serde(default)]
    pub room_augment_id: String,
    #[serde(default)]
    pub floor_level: String,
}

/// Operation-and-maintenance property value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OmValue {
    Flag(bool),
    Number(f64),
    Quantity { value: f64, unit: String },
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquipmentItem {
    pub omniclass_system: OmniclassCode,
    pub omniclass_type: OmniclassCode,
    #[serde(default)]
    pub augment_id_type: String,
    #[serde(default)]
    pub augment_id_instance: String,
    pub space_instance: String,
    pub discipline: Discipline,
    #[serde(default)]
    pub om_properties: BTreeMap<String, OmValue>,
    #[serde(default)]
    pub document_ids: Vec<String>,
}

/// Marks fixture items that exist only to feed a dashboard.
pub const DASHBOARD_SUPPORT: &str = "dashboard_support";

impl EquipmentItem {
    pub fn is_dashboard_support(&self) -> bool {
        matches!(self.om_properties.get(DASHBOARD_SUPPORT), Some(OmValue::Flag(true)))
    }

    /// The record with platform-assigned fields cleared; two rows describe the
    /// same physical content iff their content keys are equal.
    pub fn content_key(&self) -> EquipmentItem {
        EquipmentItem {
            augment_id_type: String::new(),
            augment_id_instance: String::new(),
            document_ids: Vec::new(),
            ..self.clone()
        }
    }

    fn same_except_documents(&self, other: &EquipmentItem) -> bool {
        EquipmentItem { document_ids: Vec::new(), ..self.clone() }
            == EquipmentItem { document_ids: Vec::new(), ..other.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocumentKind {
    CutSheet,
    OperationManual,
    Warranty,
    ProductSpecification,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentMeta {
    #[serde(default)]
    pub doc_id: String,
    pub kind: DocumentKind,
    pub title: String,
    #[serde(default)]
    pub uri_or_path: String,
    pub uploaded_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("malformed room category {0:?}")]
    MalformedCategory(String),
    #[error("malformed equipment classification {0:?}")]
    MalformedCode(String),
    #[error("room tag must not be empty")]
    EmptyTag,
    #[error("room {tag:?} already exists with a different name or category")]
    DuplicateTagConflict { tag: String },
    #[error("unknown space {0:?}")]
    UnknownSpace(String),
    #[error("unknown equipment {0:?}")]
    UnknownEquipment(String),
    #[error("unknown sensor {0:?}")]
    UnknownSensor(String),
    #[error("unknown alarm {0:?}")]
    UnknownAlarm(String),
    #[error("unknown policy {0:?}")]
    UnknownPolicy(String),
    #[error("unknown job {0:?}")]
    UnknownJob(String),
    #[error("identifier {0:?} is already in use")]
    DuplicateId(String),
    #[error("equipment {equipment:?} already has a {kind} sensor ({existing:?})")]
    KindAlreadyBound { equipment: String, kind: SensorKind, existing: String },
    #[error("invalid record: {0}")]
    Invalid(String),
    #[error("event sequence gap: expected {expected}, found {found}")]
    GapInSequence { expected: u64, found: u64 },
    #[error("unknown event kind {0:?}")]
    UnknownEventKind(String),
}

/// How [`TwinGraph::query`] selects equipment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector {
    ByRoomTag(String),
    ByDiscipline(Discipline),
    /// Matches against the rendered type or system code.
    ByOmniclassPrefix(String),
    ByAugmentId(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TwinGraph {
    pub spaces: BTreeMap<String, SpaceRecord>,
    pub equipment: BTreeMap<String, EquipmentItem>,
    /// Items committed before AugmentID assignment, in ingest order.
    pub pending_equipment: Vec<EquipmentItem>,
    pub sensors: BTreeMap<String, SensorSpec>,
    pub documents: BTreeMap<String, DocumentMeta>,
    /// Per sensor, ordered by timestamp then commit order.
    pub readings: BTreeMap<String, Vec<SensorReading>>,
    pub rule_states: BTreeMap<String, RuleState>,
    pub alarms: BTreeMap<String, AlarmRecord>,
    pub policies: BTreeMap<String, MaintenancePolicy>,
    pub jobs: BTreeMap<String, MaintenanceJob>,
    pub last_seq: u64,
}

impl TwinGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pending items first (empty id), then by AugmentID; ties by room tag.
    pub fn all_equipment(&self) -> impl Iterator<Item = &EquipmentItem> {
        self.pending_equipment.iter().chain(self.equipment.values())
    }

    pub fn query(&self, selector: &Selector) -> Vec<&EquipmentItem> {
        let mut out: Vec<&EquipmentItem> = self
            .all_equipment()
            .filter(|item| match selector {
                Selector::ByRoomTag(tag) => &item.space_instance == tag,
                Selector::ByDiscipline(d) => item.discipline == *d,
                Selector::ByOmniclassPrefix(prefix) => {
                    item.omniclass_type.to_string().starts_with(prefix.as_str())
                        || item.omniclass_system.to_string().starts_with(prefix.as_str())
                }
                Selector::ByAugmentId(id) => &item.augment_id_instance == id,
            })
            .collect();
        out.sort_by(|a, b| {
            (&a.augment_id_instance, &a.space_instance).cmp(&(&b.augment_id_instance, &b.space_instance))
        });
        out
    }

    pub fn documents_of(&self, equipment_id: &str) -> Option<Vec<&DocumentMeta>> {
        let item = self.equipment.get(equipment_id)?;
        Some(item.document_ids.iter().filter_map(|id| self.documents.get(id)).collect())
    }

    /// Sensors bound to one equipment item, ordered by sensor id.
    pub fn sensors_of<'a>(&'a self, equipment_id: &'a str) -> impl Iterator<Item = &'a SensorSpec> + 'a {
        self.sensors.values().filter(move |s| s.bound_equipment == equipment_id)
    }

    pub fn sensor_for(&self, equipment_id: &str, kind: SensorKind) -> Option<&SensorSpec> {
        self.sensors.values().find(|s| s.bound_equipment == equipment_id && s.kind == kind)
    }

    /// The equipment a sensor reports for.
    pub fn equipment_of_sensor(&self, sensor_id: &str) -> Option<&EquipmentItem> {
        self.sensors.get(sensor_id).and_then(|s| self.equipment.get(&s.bound_equipment))
    }

    pub fn active_alarm_for(&self, sensor_id: &str) -> Option<&AlarmRecord> {
        self.alarms
            .values()
            .find(|a| a.sensor_id == sensor_id && a.state != AlarmState::Cleared)
    }

    pub(crate) fn policy_target_resolves(&self, target: &PolicyTarget) -> bool {
        match target {
            PolicyTarget::EquipmentType(code) => self.equipment.values().any(|e| &e.omniclass_type == code),
            PolicyTarget::Room(tag) => self.spaces.contains_key(tag),
        }
    }

    pub(crate) fn job_target_resolves(&self, target: &JobTarget) -> bool {
        match target {
            JobTarget::Equipment(id) => self.equipment.contains_key(id),
            JobTarget::Space(tag) => self.spaces.contains_key(tag),
        }
    }

    /// Validates `event` against the current state, then applies it. On error
    /// the graph is untouched.
    pub fn apply(&mut self, event: &TwinEvent) -> Result<(), GraphError> {
        let expected = self.last_seq + 1;
        if event.seq != expected {
            return Err(GraphError::GapInSequence { expected, found: event.seq });
        }
        self.check(&event.body)?;
        self.apply_checked(event);
        self.last_seq = event.seq;
        Ok(())
    }

    fn check(&self, body: &EventBody) -> Result<(), GraphError> {
        match body {
            EventBody::SpaceUpserted(space) => {
                if space.room_category.table() != OmniclassTable::Spaces {
                    return Err(GraphError::MalformedCategory(space.room_category.to_string()));
                }
                if space.room_tag.trim().is_empty() {
                    return Err(GraphError::EmptyTag);
                }
                if !space.room_augment_id.is_empty()
                    && self
                        .spaces
                        .values()
                        .any(|s| s.room_tag != space.room_tag && s.room_augment_id == space.room_augment_id)
                {
                    return Err(GraphError::DuplicateId(space.room_augment_id.clone()));
                }
            }
            EventBody::EquipmentUpserted(item) => {
                for code in [&item.omniclass_system, &item.omniclass_type] {
                    if code.table() != OmniclassTable::Products {
                        return Err(GraphError::MalformedCode(code.to_string()));
                    }
                }
                if !self.spaces.contains_key(&item.space_instance) {
                    return Err(GraphError::UnknownSpace(item.space_instance.clone()));
                }
                if let Some(doc) = item.document_ids.iter().find(|d| !self.documents.contains_key(*d)) {
                    return Err(GraphError::Invalid(format!("unknown document {doc:?}")));
                }
            }
            EventBody::DocAttached { equipment_id, document } => {
                if !self.equipment.contains_key(equipment_id) {
                    return Err(GraphError::UnknownEquipment(equipment_id.clone()));
                }
                if document.doc_id.is_empty() {
                    return Err(GraphError::Invalid("document id must not be empty".into()));
                }
                if self.documents.contains_key(&document.doc_id) {
                    return Err(GraphError::DuplicateId(document.doc_id.clone()));
                }
            }
            EventBody::SensorBound { spec, rule } => {
                if !self.equipment.contains_key(&spec.bound_equipment) {
                    return Err(GraphError::UnknownEquipment(spec.bound_equipment.clone()));
                }
                spec.validate().map_err(|e| GraphError::Invalid(e.to_string()))?;
                rule.validate().map_err(|e| GraphError::Invalid(e.to_string()))?;
                if rule.sensor_id != spec.sensor_id {
                    return Err(GraphError::Invalid("alarm rule names a different sensor".into()));
                }
                if let Some(existing) = self.sensor_for(&spec.bound_equipment, spec.kind) {
                    if existing.sensor_id != spec.sensor_id {
                        return Err(GraphError::KindAlreadyBound {
                            equipment: spec.bound_equipment.clone(),
                            kind: spec.kind,
                            existing: existing.sensor_id.clone(),
                        });
                    }
                }
                if let Some(existing) = self.sensors.get(&spec.sensor_id) {
                    if existing.bound_equipment != spec.bound_equipment || existing.kind != spec.kind {
                        return Err(GraphError::DuplicateId(spec.sensor_id.clone()));
                    }
                }
            }
            EventBody::ReadingIngested(reading) => {
                let spec = self
                    .sensors
                    .get(&reading.sensor_id)
                    .ok_or_else(|| GraphError::UnknownSensor(reading.sensor_id.clone()))?;
                if !reading.value.is_finite() {
                    return Err(GraphError::Invalid("reading value must be finite".into()));
                }
                if spec.kind == SensorKind::Occupancy && reading.value != 0.0 && reading.value != 1.0 {
                    return Err(GraphError::Invalid("occupancy readings must be 0 or 1".into()));
                }
            }
            EventBody::AlarmRaised(alarm) => {
                if !self.sensors.contains_key(&alarm.sensor_id) {
                    return Err(GraphError::UnknownSensor(alarm.sensor_id.clone()));
                }
                if self.alarms.contains_key(&alarm.alarm_id) {
                    return Err(GraphError::DuplicateId(alarm.alarm_id.clone()));
                }
                if self.active_alarm_for(&alarm.sensor_id).is_some() {
                    return Err(GraphError::Invalid(format!(
                        "sensor {:?} already has an active alarm",
                        alarm.sensor_id
                    )));
                }
            }
            EventBody::AlarmAcked { alarm_id, .. } => {
                let alarm = self.alarms.get(alarm_id).ok_or_else(|| GraphError::UnknownAlarm(alarm_id.clone()))?;
                if alarm.state != AlarmState::Raised {
                    return Err(GraphError::Invalid(format!("alarm {alarm_id:?} is {:?}", alarm.state)));
                }
            }
            EventBody::AlarmCleared { alarm_id, .. } => {
                let alarm = self.alarms.get(alarm_id).ok_or_else(|| GraphError::UnknownAlarm(alarm_id.clone()))?;
                if alarm.state == AlarmState::Cleared {
                    return Err(GraphError::Invalid(format!("alarm {alarm_id:?} already cleared")));
                }
            }
            EventBody::PolicyCreated(policy) => {
                policy.validate().map_err(|e| GraphError::Invalid(e.to_string()))?;
                if !self.policy_target_resolves(&policy.target) {
                    return Err(GraphError::Invalid(format!("policy target {} does not resolve", policy.target)));
                }
                if self.policies.contains_key(&policy.policy_id) {
                    return Err(GraphError::DuplicateId(policy.policy_id.clone()));
                }
            }
            EventBody::JobCreated(job) => {
                if self.jobs.contains_key(&job.job_id) {
                    return Err(GraphError::DuplicateId(job.job_id.clone()));
                }
                if !self.job_target_resolves(&job.target) {
                    return Err(GraphError::Invalid(format!("job target {} does not resolve", job.target)));
                }
                if job.assignee_role != job.target.role() {
                    return Err(GraphError::Invalid("assignee role does not match target kind".into()));
                }
                if let crate::maintenance::JobOrigin::Preventive { policy_id, .. } = &job.origin {
                    if !self.policies.contains_key(policy_id) {
                        return Err(GraphError::UnknownPolicy(policy_id.clone()));
                    }
                }
            }
            EventBody::JobTransitioned { job_id, from, to, .. } => {
                let job = self.jobs.get(job_id).ok_or_else(|| GraphError::UnknownJob(job_id.clone()))?;
                if job.status != *from || !from.can_transition_to(*to) {
                    return Err(GraphError::Invalid(format!("illegal transition {from} -> {to} for {job_id:?}")));
                }
            }
            EventBody::CommentAdded { job_id, text, .. } => {
                if !self.jobs.contains_key(job_id) {
                    return Err(GraphError::UnknownJob(job_id.clone()));
                }
                if text.trim().is_empty() {
                    return Err(GraphError::Invalid("empty comment".into()));
                }
            }
        }
        Ok(())
    }

    fn apply_checked(&mut self, event: &TwinEvent) {
        let at = event.at;
        match &event.body {
            EventBody::SpaceUpserted(space) => {
                self.spaces.insert(space.room_tag.clone(), space.clone());
            }
            EventBody::EquipmentUpserted(item) => {
                if item.augment_id_instance.is_empty() {
                    self.pending_equipment.push(item.clone());
                    return;
                }
                let key = item.content_key();
                if let Some(pos) = self.pending_equipment.iter().position(|p| p.content_key() == key) {
                    self.pending_equipment.remove(pos);
                }
                let mut stored = item.clone();
                if let Some(previous) = self.equipment.get(&item.augment_id_instance) {
                    if stored.document_ids.is_empty() {
                        stored.document_ids = previous.document_ids.clone();
                    }
                }
                self.equipment.insert(stored.augment_id_instance.clone(), stored);
            }
            EventBody::DocAttached { equipment_id, document } => {
                self.documents.insert(document.doc_id.clone(), document.clone());
                if let Some(item) = self.equipment.get_mut(equipment_id) {
                    item.document_ids.push(document.doc_id.clone());
                }
            }
            EventBody::SensorBound { spec, rule } => {
                self.sensors.insert(spec.sensor_id.clone(), spec.clone());
                let state = match self.rule_states.remove(&spec.sensor_id) {
                    Some(previous) => RuleState { rule: rule.clone(), ..previous },
                    None => RuleState::new(rule.clone()),
                };
                self.rule_states.insert(spec.sensor_id.clone(), state);
            }
            EventBody::ReadingIngested(reading) => {
                let series = self.readings.entry(reading.sensor_id.clone()).or_default();
                let pos = series.partition_point(|r| r.at <= reading.at);
                series.insert(pos, reading.clone());
                if let Some(state) = self.rule_states.get_mut(&reading.sensor_id) {
                    // Sensor id matches by construction, so evaluation cannot fail.
                    if let Ok((_, next)) = crate::alarms::evaluate(state, reading) {
                        *state = next;
                    }
                }
            }
            EventBody::AlarmRaised(alarm) => {
                self.alarms.insert(alarm.alarm_id.clone(), alarm.clone());
            }
            EventBody::AlarmAcked { alarm_id, actor } => {
                if let Some(alarm) = self.alarms.get_mut(alarm_id) {
                    alarm.state = AlarmState::Acknowledged;
                    alarm.acked_at = Some(at);
                    alarm.actor = Some(actor.clone());
                }
            }
            EventBody::AlarmCleared { alarm_id, .. } => {
                if let Some(alarm) = self.alarms.get_mut(alarm_id) {
                    alarm.state = AlarmState::Cleared;
                    alarm.cleared_at = Some(at);
                }
            }
            EventBody::PolicyCreated(policy) => {
                self.policies.insert(policy.policy_id.clone(), policy.clone());
            }
            EventBody::JobCreated(job) => {
                self.jobs.insert(job.job_id.clone(), job.clone());
            }
            EventBody::JobTransitioned { job_id, from, to, actor, comment } => {
                if let Some(job) = self.jobs.get_mut(job_id) {
                    job.apply_transition(at, *from, *to, actor, comment.as_deref());
                }
            }
            EventBody::CommentAdded { job_id, actor, text } => {
                if let Some(job) = self.jobs.get_mut(job_id) {
                    job.push_comment(at, actor, text);
                }
            }
        }
    }

    /// Checks every cross-reference in the graph. Used by tests and on load.
    pub fn dangling_references(&self) -> Vec<String> {
        let mut out = Vec::new();
        for item in self.all_equipment() {
            if !self.spaces.contains_key(&item.space_instance) {
                out.push(format!("equipment {:?} -> space {:?}", item.augment_id_instance, item.space_instance));
            }
            for doc in &item.document_ids {
                if !self.documents.contains_key(doc) {
                    out.push(format!("equipment {:?} -> document {doc:?}", item.augment_id_instance));
                }
            }
        }
        for spec in self.sensors.values() {
            if !self.equipment.contains_key(&spec.bound_equipment) {
                out.push(format!("sensor {:?} -> equipment {:?}", spec.sensor_id, spec.bound_equipment));
            }
        }
        for (sensor_id, _) in self.readings.iter().filter(|(s, _)| !self.sensors.contains_key(*s)) {
            out.push(format!("readings -> sensor {sensor_id:?}"));
        }
        for alarm in self.alarms.values().filter(|a| !self.sensors.contains_key(&a.sensor_id)) {
            out.push(format!("alarm {:?} -> sensor {:?}", alarm.alarm_id, alarm.sensor_id));
        }
        for job in self.jobs.values().filter(|j| !self.job_target_resolves(&j.target)) {
            out.push(format!("job {:?} -> {}", job.job_id, job.target));
        }
        out
    }

    pub(crate) fn same_equipment(existing: &EquipmentItem, incoming: &EquipmentItem) -> bool {
        existing.same_except_documents(incoming)
    }
}
