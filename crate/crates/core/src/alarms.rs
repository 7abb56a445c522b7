//! Threshold alarms with raise/clear debounce.
//!
//! ```text
//!             out-of-range streak == raise_debounce
//!   (idle) ─────────────────────────────────────────► raised ──ack──► acknowledged
//!     ▲                                                  │                 │
//!     └───────── in-range streak == clear_debounce ──────┴─────────────────┘
//! ```
//!
//! Values equal to `low` or `high` are in range.

use serde::{Deserialize, Serialize};

use crate::graph::{Discipline, EventBody, GraphError, TwinGraph, TwinStore};
use crate::telemetry::SensorReading;
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmRule {
    pub sensor_id: String,
    pub low: f64,
    pub high: f64,
    pub raise_debounce: u32,
    pub clear_debounce: u32,
}

impl AlarmRule {
    pub fn validate(&self) -> Result<(), AlarmError> {
        if !(self.low < self.high) {
            return Err(AlarmError::InvalidRule(format!("low {} must be below high {}", self.low, self.high)));
        }
        if self.raise_debounce < 1 || self.clear_debounce < 1 {
            return Err(AlarmError::InvalidRule("debounce counts must be at least 1".into()));
        }
        Ok(())
    }

    pub fn in_range(&self, value: f64) -> bool {
        value >= self.low && value <= self.high
    }
}

/// Streak counters for one sensor's rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleState {
    pub rule: AlarmRule,
    pub out_streak: u32,
    pub in_streak: u32,
    pub active: bool,
}

impl RuleState {
    pub fn new(rule: AlarmRule) -> Self {
        Self { rule, out_streak: 0, in_streak: 0, active: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "transition", rename_all = "snake_case")]
pub enum AlarmTransition {
    Raise { trigger_value: f64 },
    Clear { value: f64 },
}

/// Feeds one reading through the rule. Pure: the caller stores the new state.
pub fn evaluate(state: &RuleState, reading: &SensorReading) -> Result<(Option<AlarmTransition>, RuleState), AlarmError> {
    if reading.sensor_id != state.rule.sensor_id {
        return Err(AlarmError::SensorMismatch {
            rule: state.rule.sensor_id.clone(),
            reading: reading.sensor_id.clone(),
        });
    }
    let mut next = state.clone();
    let mut transition = None;
    if state.rule.in_range(reading.value) {
        next.out_streak = 0;
        next.in_streak = state.in_streak.saturating_add(1);
        if next.active && next.in_streak >= state.rule.clear_debounce {
            next.active = false;
            transition = Some(AlarmTransition::Clear { value: reading.value });
        }
    } else {
        next.in_streak = 0;
        next.out_streak = state.out_streak.saturating_add(1);
        if !next.active && next.out_streak == state.rule.raise_debounce {
            next.active = true;
            transition = Some(AlarmTransition::Raise { trigger_value: reading.value });
        }
    }
    Ok((transition, next))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlarmState {
    Raised,
    Acknowledged,
    Cleared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmRecord {
    pub alarm_id: String,
    pub sensor_id: String,
    pub state: AlarmState,
    pub raised_at: Timestamp,
    #[serde(default)]
    pub acked_at: Option<Timestamp>,
    #[serde(default)]
    pub cleared_at: Option<Timestamp>,
    pub trigger_value: f64,
    #[serde(default)]
    pub actor: Option<String>,
}

impl AlarmRecord {
    pub fn is_active(&self) -> bool {
        self.state != AlarmState::Cleared
    }

    /// Active at instant `t`: raised before `t` and not cleared by then.
    pub fn active_at(&self, t: Timestamp) -> bool {
        self.raised_at < t && self.cleared_at.is_none_or(|c| c >= t)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlarmError {
    #[error("reading for sensor {reading:?} evaluated against rule for {rule:?}")]
    SensorMismatch { rule: String, reading: String },
    #[error("invalid alarm rule: {0}")]
    InvalidRule(String),
    #[error("unknown alarm {0:?}")]
    UnknownAlarm(String),
    #[error("alarm {alarm_id:?} is {state:?}")]
    IllegalState { alarm_id: String, state: AlarmState },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum AlarmFilter {
    #[default]
    All,
    ByEquipment(String),
    ByDiscipline(Discipline),
}

pub(crate) fn next_alarm_id(graph: &TwinGraph) -> String {
    format!("AL-{:05}", graph.alarms.len() + 1)
}

impl TwinGraph {
    /// Raised or acknowledged alarms, oldest first.
    pub fn active_alarms(&self, filter: &AlarmFilter) -> Vec<&AlarmRecord> {
        let mut out: Vec<&AlarmRecord> = self
            .alarms
            .values()
            .filter(|a| a.is_active())
            .filter(|a| match filter {
                AlarmFilter::All => true,
                AlarmFilter::ByEquipment(id) => {
                    self.sensors.get(&a.sensor_id).is_some_and(|s| &s.bound_equipment == id)
                }
                AlarmFilter::ByDiscipline(d) => self.equipment_of_sensor(&a.sensor_id).is_some_and(|e| e.discipline == *d),
            })
            .collect();
        out.sort_by(|a, b| (a.raised_at, &a.alarm_id).cmp(&(b.raised_at, &b.alarm_id)));
        out
    }
}

impl TwinStore {
    pub fn acknowledge(&mut self, at: Timestamp, alarm_id: &str, actor: &str) -> Result<AlarmRecord, AlarmError> {
        let alarm = self
            .graph()
            .alarms
            .get(alarm_id)
            .ok_or_else(|| AlarmError::UnknownAlarm(alarm_id.to_string()))?;
        if alarm.state != AlarmState::Raised {
            return Err(AlarmError::IllegalState { alarm_id: alarm_id.to_string(), state: alarm.state });
        }
        self.commit(at, EventBody::AlarmAcked { alarm_id: alarm_id.to_string(), actor: actor.to_string() })?;
        Ok(self.graph().alarms[alarm_id].clone())
    }
}
