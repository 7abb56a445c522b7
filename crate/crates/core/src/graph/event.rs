use serde::{Deserialize, Serialize};

use super::{DocumentMeta, EquipmentItem, SpaceRecord};
use crate::alarms::{AlarmRecord, AlarmRule};
use crate::maintenance::{JobStatus, MaintenanceJob, MaintenancePolicy};
use crate::telemetry::{SensorReading, SensorSpec};
use crate::time::Timestamp;

/// One line of the event log: `{"seq":…,"at":…,"kind":…,"payload":…}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinEvent {
    pub seq: u64,
    pub at: Timestamp,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    SpaceUpserted(SpaceRecord),
    EquipmentUpserted(EquipmentItem),
    DocAttached {
        equipment_id: String,
        document: DocumentMeta,
    },
    SensorBound {
        spec: SensorSpec,
        rule: AlarmRule,
    },
    ReadingIngested(SensorReading),
    AlarmRaised(AlarmRecord),
    AlarmAcked {
        alarm_id: String,
        actor: String,
    },
    AlarmCleared {
        alarm_id: String,
        clear_value: f64,
    },
    PolicyCreated(MaintenancePolicy),
    JobCreated(MaintenanceJob),
    JobTransitioned {
        job_id: String,
        from: JobStatus,
        to: JobStatus,
        actor: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        comment: Option<String>,
    },
    CommentAdded {
        job_id: String,
        actor: String,
        text: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SpaceUpserted,
    EquipmentUpserted,
    DocAttached,
    SensorBound,
    ReadingIngested,
    AlarmRaised,
    AlarmAcked,
    AlarmCleared,
    PolicyCreated,
    JobCreated,
    JobTransitioned,
    CommentAdded,
}

impl EventKind {
    pub const ALL: [EventKind; 12] = [
        Self::SpaceUpserted,
        Self::EquipmentUpserted,
        Self::DocAttached,
        Self::SensorBound,
        Self::ReadingIngested,
        Self::AlarmRaised,
        Self::AlarmAcked,
        Self::AlarmCleared,
        Self::PolicyCreated,
        Self::JobCreated,
        Self::JobTransitioned,
        Self::CommentAdded,
    ];

    pub const fn as_str(self) -> &'static str {
        match self {
            Self::SpaceUpserted => "space_upserted",
            Self::EquipmentUpserted => "equipment_upserted",
            Self::DocAttached => "doc_attached",
            Self::SensorBound => "sensor_bound",
            Self::ReadingIngested => "reading_ingested",
            Self::AlarmRaised => "alarm_raised",
            Self::AlarmAcked => "alarm_acked",
            Self::AlarmCleared => "alarm_cleared",
            Self::PolicyCreated => "policy_created",
            Self::JobCreated => "job_created",
            Self::JobTransitioned => "job_transitioned",
            Self::CommentAdded => "comment_added",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            Self::SpaceUpserted(_) => EventKind::SpaceUpserted,
            Self::EquipmentUpserted(_) => EventKind::EquipmentUpserted,
            Self::DocAttached { .. } => EventKind::DocAttached,
            Self::SensorBound { .. } => EventKind::SensorBound,
            Self::ReadingIngested(_) => EventKind::ReadingIngested,
            Self::AlarmRaised(_) => EventKind::AlarmRaised,
            Self::AlarmAcked { .. } => EventKind::AlarmAcked,
            Self::AlarmCleared { .. } => EventKind::AlarmCleared,
            Self::PolicyCreated(_) => EventKind::PolicyCreated,
            Self::JobCreated(_) => EventKind::JobCreated,
            Self::JobTransitioned { .. } => EventKind::JobTransitioned,
            Self::CommentAdded { .. } => EventKind::CommentAdded,
        }
    }
}

impl TwinEvent {
    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }

    /// The event as one log line, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events always serialize")
    }
}
