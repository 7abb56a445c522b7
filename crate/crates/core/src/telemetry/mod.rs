//! Sensor bindings, live ingestion over `twin/<building>/<augment_id>/<kind>`
//! topics, and the deterministic sensor-fleet simulator.

mod defaults;
mod sim;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::alarms::{self, AlarmRecord, AlarmRule, AlarmState, AlarmTransition};
use crate::graph::{EventBody, GraphError, TwinStore};
use crate::time::Timestamp;

pub use defaults::{AlarmDefaults, KindDefaults, PlatformDefaults};
pub use sim::{counter_key, expected_reading_count, generate_readings, grid_times, next_reading, SimulationSummary, SimulationWindow};

/// Readings must arrive every one to five minutes.
pub const MIN_INTERVAL_S: u32 = 60;
pub const MAX_INTERVAL_S: u32 = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Temperature,
    Humidity,
    Co,
    Co2,
    Occupancy,
    Pressure,
    FlowRate,
    Power,
    Voltage,
    Amperage,
    Runtime,
    FuelLevel,
    Load,
}

impl SensorKind {
    pub const ALL: [SensorKind; 13] = [
        Self::Temperature,
        Self::Humidity,
        Self::Co,
        Self::Co2,
        Self::Occupancy,
        Self::Pressure,
        Self::FlowRate,
        Self::Power,
        Self::Voltage,
        Self::Amperage,
        Self::Runtime,
        Self::FuelLevel,
        Self::Load,
    ];

    pub const fn as_str(self) -> &'static str {
        match self {
            Self::Temperature => "temperature",
            Self::Humidity => "humidity",
            Self::Co => "co",
            Self::Co2 => "co2",
            Self::Occupancy => "occupancy",
            Self::Pressure => "pressure",
            Self::FlowRate => "flow_rate",
            Self::Power => "power",
            Self::Voltage => "voltage",
            Self::Amperage => "amperage",
            Self::Runtime => "runtime",
            Self::FuelLevel => "fuel_level",
            Self::Load => "load",
        }
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SensorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| format!("unknown sensor kind {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalRange {
    pub low: f64,
    pub high: f64,
}

impl NormalRange {
    pub fn contains(&self, value: f64) -> bool {
        value >= self.low && value <= self.high
    }
}

/// How the simulator produces values for one sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum SimProfile {
    /// `baseline + diurnal_amplitude * sin(2π · second_of_day / 86400) + noise`,
    /// optionally rounded to `resolution`.
    Signal {
        baseline: f64,
        diurnal_amplitude: f64,
        noise_sigma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resolution: Option<f64>,
    },
    /// Emits 1 with probability `p_occupied` inside `[from, to)` hours UTC,
    /// `p_unoccupied` outside.
    Occupancy {
        occupied_from_hour: u32,
        occupied_to_hour: u32,
        p_occupied: f64,
        p_unoccupied: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub sensor_id: String,
    pub bound_equipment: String,
    pub kind: SensorKind,
    pub unit: String,
    pub interval_s: u32,
    pub normal_range: NormalRange,
    pub sim_profile: SimProfile,
    #[serde(default)]
    pub live_capable: bool,
    #[serde(default)]
    pub dashboard_support: bool,
}

impl SensorSpec {
    pub fn validate(&self) -> Result<(), TelemetryError> {
        if self.sensor_id.trim().is_empty() {
            return Err(TelemetryError::InvalidSpec("sensor id must not be empty".into()));
        }
        if !(MIN_INTERVAL_S..=MAX_INTERVAL_S).contains(&self.interval_s) {
            return Err(TelemetryError::IntervalOutOfRange(self.interval_s));
        }
        if !(self.normal_range.low < self.normal_range.high) {
            return Err(TelemetryError::InvalidSpec(format!(
                "normal range [{}, {}] must satisfy low < high",
                self.normal_range.low, self.normal_range.high
            )));
        }
        match (&self.sim_profile, self.kind) {
            (SimProfile::Occupancy { .. }, SensorKind::Occupancy) | (SimProfile::Signal { .. }, _) => {}
            _ => return Err(TelemetryError::InvalidSpec("occupancy profile on a non-occupancy sensor".into())),
        }
        if let SimProfile::Occupancy { occupied_from_hour, occupied_to_hour, p_occupied, p_unoccupied } = &self.sim_profile {
            let p_ok = |p: &f64| (0.0..=1.0).contains(p);
            if *occupied_from_hour > 24 || *occupied_to_hour > 24 || !p_ok(p_occupied) || !p_ok(p_unoccupied) {
                return Err(TelemetryError::InvalidSpec("occupancy schedule out of range".into()));
            }
        }
        if let SimProfile::Signal { noise_sigma, resolution, .. } = &self.sim_profile {
            if *noise_sigma < 0.0 || resolution.is_some_and(|r| r <= 0.0) {
                return Err(TelemetryError::InvalidSpec("noise sigma and resolution must be non-negative".into()));
            }
        }
        Ok(())
    }

    pub fn is_on_grid(&self, t: Timestamp) -> bool {
        t.epoch_seconds().rem_euclid(i64::from(self.interval_s)) == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadingSource {
    Simulated,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub sensor_id: String,
    pub at: Timestamp,
    pub value: f64,
    pub source: ReadingSource,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TelemetryError {
    #[error("unknown equipment {0:?}")]
    UnknownEquipment(String),
    #[error("interval {0}s outside the 60-300s range")]
    IntervalOutOfRange(u32),
    #[error("invalid sensor spec: {0}")]
    InvalidSpec(String),
    #[error("timestamp {at} is not on the {interval_s}s grid")]
    OffGridTimestamp { at: Timestamp, interval_s: u32 },
    #[error("no sensors are bound")]
    NoSensors,
    #[error("no sensor bound for topic {0:?}")]
    UnboundSensor(String),
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
    #[error("unit mismatch: sensor reports {expected:?}, payload has {found:?}")]
    UnitMismatch { expected: String, found: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A parsed `twin/<building>/<augment_id>/<kind>` topic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topic {
    pub building: String,
    pub equipment_id: String,
    pub kind: SensorKind,
}

impl Topic {
    pub fn parse(topic: &str) -> Result<Self, TelemetryError> {
        let parts: Vec<&str> = topic.split('/').collect();
        match parts.as_slice() {
            ["twin", building, equipment, kind] if !building.is_empty() && !equipment.is_empty() => Ok(Self {
                building: building.to_string(),
                equipment_id: equipment.to_string(),
                kind: kind.parse().map_err(|_| TelemetryError::UnboundSensor(topic.to_string()))?,
            }),
            _ => Err(TelemetryError::UnboundSensor(topic.to_string())),
        }
    }

    pub fn render(building: &str, equipment_id: &str, kind: SensorKind) -> String {
        format!("twin/{building}/{equipment_id}/{kind}")
    }
}

/// Wire payload for live readings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LivePayload {
    pub at: Timestamp,
    pub value: f64,
    pub unit: String,
}

/// What committing one reading produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReadingOutcome {
    pub reading_seq: u64,
    pub alarm: Option<AlarmRecord>,
}

impl TwinStore {
    /// Registers `spec` against its equipment. A missing rule is derived from
    /// the spec's normal range with the default debounces. Re-binding an
    /// identical spec is a no-op.
    pub fn bind_sensor(
        &mut self,
        at: Timestamp,
        spec: SensorSpec,
        rule: Option<AlarmRule>,
        defaults: &AlarmDefaults,
    ) -> Result<String, TelemetryError> {
        if !self.graph().equipment.contains_key(&spec.bound_equipment) {
            return Err(TelemetryError::UnknownEquipment(spec.bound_equipment.clone()));
        }
        spec.validate()?;
        let rule = rule.unwrap_or_else(|| AlarmRule {
            sensor_id: spec.sensor_id.clone(),
            low: spec.normal_range.low,
            high: spec.normal_range.high,
            raise_debounce: defaults.raise_debounce,
            clear_debounce: defaults.clear_debounce,
        });
        let unchanged = self.graph().sensors.get(&spec.sensor_id) == Some(&spec)
            && self.graph().rule_states.get(&spec.sensor_id).map(|s| &s.rule) == Some(&rule);
        if !unchanged {
            self.commit(at, EventBody::SensorBound { spec: spec.clone(), rule })?;
        }
        Ok(spec.sensor_id)
    }

    /// Commits a reading and any alarm transition it causes.
    pub fn record_reading(&mut self, reading: SensorReading) -> Result<ReadingOutcome, TelemetryError> {
        let state = self
            .graph()
            .rule_states
            .get(&reading.sensor_id)
            .cloned()
            .ok_or_else(|| TelemetryError::UnboundSensor(reading.sensor_id.clone()))?;
        let (transition, _) = alarms::evaluate(&state, &reading).map_err(|e| TelemetryError::InvalidSpec(e.to_string()))?;
        let at = reading.at;
        let sensor_id = reading.sensor_id.clone();
        let reading_seq = self.commit(at, EventBody::ReadingIngested(reading))?.seq;

        let alarm = match transition {
            Some(AlarmTransition::Raise { trigger_value }) => {
                let record = AlarmRecord {
                    alarm_id: alarms::next_alarm_id(self.graph()),
                    sensor_id,
                    state: AlarmState::Raised,
                    raised_at: at,
                    acked_at: None,
                    cleared_at: None,
                    trigger_value,
                    actor: None,
                };
                self.commit(at, EventBody::AlarmRaised(record.clone()))?;
                Some(record)
            }
            Some(AlarmTransition::Clear { value }) => match self.graph().active_alarm_for(&sensor_id) {
                Some(active) => {
                    let alarm_id = active.alarm_id.clone();
                    self.commit(at, EventBody::AlarmCleared { alarm_id: alarm_id.clone(), clear_value: value })?;
                    self.graph().alarms.get(&alarm_id).cloned()
                }
                None => None,
            },
            None => None,
        };
        Ok(ReadingOutcome { reading_seq, alarm })
    }

    /// Accepts one live message from the pub/sub bus.
    pub fn ingest(&mut self, building_id: &str, topic: &str, payload: &[u8]) -> Result<(SensorReading, ReadingOutcome), TelemetryError> {
        let parsed = Topic::parse(topic)?;
        if parsed.building != building_id {
            return Err(TelemetryError::UnboundSensor(topic.to_string()));
        }
        let spec = self
            .graph()
            .sensor_for(&parsed.equipment_id, parsed.kind)
            .ok_or_else(|| TelemetryError::UnboundSensor(topic.to_string()))?;
        let payload: LivePayload =
            serde_json::from_slice(payload).map_err(|e| TelemetryError::MalformedPayload(e.to_string()))?;
        if !payload.value.is_finite() {
            return Err(TelemetryError::MalformedPayload("value must be a finite number".into()));
        }
        if payload.unit != spec.unit {
            return Err(TelemetryError::UnitMismatch { expected: spec.unit.clone(), found: payload.unit });
        }
        if spec.kind == SensorKind::Occupancy && payload.value != 0.0 && payload.value != 1.0 {
            return Err(TelemetryError::MalformedPayload("occupancy value must be 0 or 1".into()));
        }
        let reading = SensorReading {
            sensor_id: spec.sensor_id.clone(),
            at: payload.at,
            value: payload.value,
            source: ReadingSource::Live,
        };
        let outcome = self.record_reading(reading.clone())?;
        Ok((reading, outcome))
    }

    /// Most recent reading per bound kind.
    pub fn latest(&self, equipment_id: &str) -> Result<BTreeMap<SensorKind, SensorReading>, TelemetryError> {
        let graph = self.graph();
        if !graph.equipment.contains_key(equipment_id) {
            return Err(TelemetryError::UnknownEquipment(equipment_id.to_string()));
        }
        Ok(graph
            .sensors_of(equipment_id)
            .filter_map(|spec| {
                // Series are time-ordered; the last entry has the highest timestamp.
                let last = graph.readings.get(&spec.sensor_id)?.last()?;
                Some((spec.kind, last.clone()))
            })
            .collect())
    }

    /// Generates and commits every reading in `window`, in canonical order
    /// (timestamp, then sensor id). `pace` is called before each commit with
    /// the reading about to be stored.
    pub fn run_simulation(
        &mut self,
        seed: u64,
        window: SimulationWindow,
        exec: crate::par::Execution,
        mut pace: impl FnMut(&SensorReading),
    ) -> Result<SimulationSummary, TelemetryError> {
        if self.graph().sensors.is_empty() {
            return Err(TelemetryError::NoSensors);
        }
        let readings = generate_readings(self.graph(), seed, window, exec)?;
        let first_seq = self.last_seq() + 1;
        let mut summary = SimulationSummary { readings: 0, alarms_raised: 0, alarms_cleared: 0, first_seq, last_seq: 0 };
        for reading in readings {
            pace(&reading);
            let outcome = self.record_reading(reading)?;
            summary.readings += 1;
            match outcome.alarm.as_ref().map(|a| a.state) {
                Some(AlarmState::Cleared) => summary.alarms_cleared += 1,
                Some(_) => summary.alarms_raised += 1,
                None => {}
            }
        }
        summary.last_seq = self.last_seq();
        Ok(summary)
    }
}
