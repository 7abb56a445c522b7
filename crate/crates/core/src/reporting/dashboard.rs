//! Dashboard time series over the metric registry.
//!
//! Buckets are aligned to epoch multiples of the bucket size. Each point
//! carries the raw `sum` and `sample_count` next to the aggregated value so
//! consumers can re-weight buckets without rounding loss.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ReportError, ReportWindow};
use crate::graph::TwinGraph;
use crate::telemetry::SensorKind;
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DashboardSystem {
    Ahu,
    DrinkingFountain,
    ElectricalPanel,
    Elevator,
    Generator,
    Lighting,
    Temperature,
    Transformer,
    WaterCloset,
    WaterPressure,
}

impl DashboardSystem {
    pub const ALL: [DashboardSystem; 10] = [
        Self::Ahu,
        Self::DrinkingFountain,
        Self::ElectricalPanel,
        Self::Elevator,
        Self::Generator,
        Self::Lighting,
        Self::Temperature,
        Self::Transformer,
        Self::WaterCloset,
        Self::WaterPressure,
    ];

    pub const fn as_str(self) -> &'static str {
        match self {
            Self::Ahu => "ahu",
            Self::DrinkingFountain => "drinking_fountain",
            Self::ElectricalPanel => "electrical_panel",
            Self::Elevator => "elevator",
            Self::Generator => "generator",
            Self::Lighting => "lighting",
            Self::Temperature => "temperature",
            Self::Transformer => "transformer",
            Self::WaterCloset => "water_closet",
            Self::WaterPressure => "water_pressure",
        }
    }
}

impl fmt::Display for DashboardSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DashboardSystem {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| ReportError::UnknownSystem(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Mean,
    Sum,
    Last,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDef {
    pub metric: String,
    pub sensor_kind: SensorKind,
    /// Omniclass number prefixes of the equipment whose sensors feed the metric.
    pub equipment_types: Vec<String>,
    pub aggregation: Aggregation,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDef {
    pub title: String,
    pub metrics: Vec<MetricDef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRegistry {
    pub schema_version: u32,
    #[serde(default)]
    pub units_note: String,
    pub systems: BTreeMap<DashboardSystem, SystemDef>,
}

const BUILTIN: &str = include_str!("../../config/metric_registry.json");

impl MetricRegistry {
    pub fn builtin() -> Self {
        serde_json::from_str(BUILTIN).expect("bundled metric_registry.json is valid")
    }

    pub fn from_path(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn system(&self, system: DashboardSystem) -> Result<&SystemDef, ReportError> {
        self.systems.get(&system).ok_or_else(|| ReportError::UnknownSystem(system.to_string()))
    }

    pub fn metric(&self, system: DashboardSystem, metric: &str) -> Result<&MetricDef, ReportError> {
        self.system(system)?
            .metrics
            .iter()
            .find(|m| m.metric == metric)
            .ok_or_else(|| ReportError::UnknownMetric { system: system.to_string(), metric: metric.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub bucket_start: Timestamp,
    /// `None` when the bucket holds no readings.
    pub value: Option<f64>,
    pub sample_count: u64,
    pub sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DashboardSeries {
    pub system: DashboardSystem,
    pub metric: String,
    pub unit: String,
    pub aggregation: Aggregation,
    pub from: Timestamp,
    pub to: Timestamp,
    pub bucket_s: i64,
    pub sensor_count: usize,
    pub points: Vec<SeriesPoint>,
}

/// Readings feeding `def` with `from <= at < to`, ordered by (at, sensor id).
pub fn metric_readings(graph: &TwinGraph, def: &MetricDef, from: Timestamp, to: Timestamp) -> (usize, Vec<(Timestamp, f64)>) {
    let sensors: Vec<&str> = graph
        .sensors
        .values()
        .filter(|s| s.kind == def.sensor_kind)
        .filter(|s| {
            graph.equipment.get(&s.bound_equipment).is_some_and(|e| {
                let number = e.omniclass_type.number();
                def.equipment_types.iter().any(|p| number.starts_with(p.as_str()))
            })
        })
        .map(|s| s.sensor_id.as_str())
        .collect();
    let mut out: Vec<(Timestamp, &str, f64)> = Vec::new();
    for id in &sensors {
        let Some(series) = graph.readings.get(*id) else { continue };
        let lo = series.partition_point(|r| r.at < from);
        let hi = series.partition_point(|r| r.at < to);
        out.extend(series[lo..hi].iter().map(|r| (r.at, *id, r.value)));
    }
    out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    (sensors.len(), out.into_iter().map(|(at, _, v)| (at, v)).collect())
}

pub fn dashboard_series(
    graph: &TwinGraph,
    registry: &MetricRegistry,
    system: DashboardSystem,
    metric: &str,
    window: &ReportWindow,
) -> Result<DashboardSeries, ReportError> {
    let def = registry.metric(system, metric)?;
    let (sensor_count, readings) = metric_readings(graph, def, window.from, window.to);
    let bucket = window.bucket_s;
    let first = window.from.epoch_seconds().div_euclid(bucket) * bucket;
    let mut points: Vec<SeriesPoint> = (first..window.to.epoch_seconds())
        .step_by(bucket as usize)
        .map(|start| SeriesPoint { bucket_start: Timestamp::from_epoch_seconds(start), value: None, sample_count: 0, sum: 0.0 })
        .collect();
    for (at, value) in readings {
        let k = ((at.epoch_seconds() - first) / bucket) as usize;
        let p = &mut points[k];
        p.sample_count += 1;
        p.sum += value;
        p.value = Some(match (def.aggregation, p.value) {
            (_, None) => value,
            (Aggregation::Last, Some(_)) => value,
            (Aggregation::Max, Some(m)) => m.max(value),
            (Aggregation::Mean | Aggregation::Sum, Some(_)) => p.sum,
        });
    }
    if def.aggregation == Aggregation::Mean {
        for p in points.iter_mut().filter(|p| p.sample_count > 0) {
            p.value = Some(p.sum / p.sample_count as f64);
        }
    }
    Ok(DashboardSeries {
        system,
        metric: def.metric.clone(),
        unit: def.unit.clone(),
        aggregation: def.aggregation,
        from: window.from,
        to: window.to,
        bucket_s: bucket,
        sensor_count,
        points,
    })
}
