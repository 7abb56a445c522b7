//! The shipped fixture set: a synthetic room roster, the itemized equipment
//! inventory, default sensor bindings, alarm rules and sample maintenance
//! policies.
//!
//! Directory layout: `spaces.csv`, `equipment.csv`, `sensors.csv`,
//! `rules.csv`, `policies.csv`, `manifest.json`.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::alarms::AlarmRule;
use crate::graph::TwinStore;
use crate::ingest::{load_inventory, IngestError, IngestOptions, IngestReport, EQUIPMENT_HEADER};
use crate::maintenance::{MaintenanceError, MaintenancePolicy, PolicyTarget, Resource};
use crate::omniclass::{OmniclassCode, OmniclassTable};
use crate::telemetry::{PlatformDefaults, SensorKind, SimProfile, TelemetryError};
use crate::time::Timestamp;

/// Directory of the fixtures bundled with this crate.
pub fn builtin_seed_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("seed")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedManifest {
    pub version: u32,
    pub as_of: Timestamp,
    pub building_id: String,
    #[serde(default)]
    pub provenance: String,
    pub space_count: usize,
    /// Itemized inventory by category.
    pub equipment_counts: BTreeMap<String, usize>,
    pub equipment_total: usize,
    /// The total quoted alongside the itemized list. It does not equal the
    /// itemized sum and is kept only to document that.
    pub headline_total: usize,
    /// Category to Omniclass type number.
    pub category_types: BTreeMap<String, String>,
    /// Items present only to feed a dashboard, excluded from the counts above.
    #[serde(default)]
    pub dashboard_support_counts: BTreeMap<String, usize>,
    #[serde(default)]
    pub dashboard_support_types: BTreeMap<String, String>,
    /// Sensors bound to sensor-category equipment.
    pub sensor_binding_count: usize,
    /// Simulated-only sensors flagged `dashboard_support`.
    pub dashboard_sensor_count: usize,
    pub policy_count: usize,
}

impl SeedManifest {
    pub fn from_path(path: &Path) -> Result<Self, SeedError> {
        let text = std::fs::read_to_string(path).map_err(|e| SeedError::unreadable(path, e))?;
        serde_json::from_str(&text).map_err(|e| SeedError::Parse { path: path.to_path_buf(), message: e.to_string() })
    }

    fn category_of(&self, type_number: &str) -> Option<(&str, bool)> {
        fn find<'m>(map: &'m BTreeMap<String, String>, number: &str) -> Option<&'m str> {
            map.iter().find(|(_, n)| n.as_str() == number).map(|(c, _)| c.as_str())
        }
        find(&self.category_types, type_number)
            .map(|c| (c, false))
            .or_else(|| find(&self.dashboard_support_types, type_number).map(|c| (c, true)))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SeedError {
    #[error("cannot read {path}: {message}")]
    Unreadable { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),
    #[error("seed inventory rejected: {0}")]
    Rejected(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Maintenance(#[from] MaintenanceError),
}

impl SeedError {
    fn unreadable(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::Unreadable { path: path.to_path_buf(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedReport {
    pub manifest: SeedManifest,
    pub ingest: IngestReport,
    pub category_counts: BTreeMap<String, usize>,
    pub sensor_bindings: usize,
    pub dashboard_sensors: usize,
    pub policies: usize,
    /// Events appended by this load; zero when the seed was already present.
    pub events_committed: u64,
}

#[derive(Debug, Deserialize)]
struct SensorRow {
    equipment_type: String,
    kind: SensorKind,
    dashboard_support: bool,
    live_capable: bool,
    interval_s: Option<u32>,
    low: Option<f64>,
    high: Option<f64>,
    baseline: Option<f64>,
    diurnal_amplitude: Option<f64>,
    noise_sigma: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct RuleRow {
    equipment_type: String,
    kind: SensorKind,
    low: f64,
    high: f64,
    raise_debounce: u32,
    clear_debounce: u32,
}

#[derive(Debug, Deserialize)]
struct PolicyRow {
    policy_id: String,
    target_type: String,
    target: String,
    tasks: String,
    frequency_days: u32,
    start_date: NaiveDate,
    resources: String,
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, SeedError> {
    let file = File::open(path).map_err(|e| SeedError::unreadable(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| SeedError::Parse { path: path.to_path_buf(), message: e.to_string() })
}

fn parse_type(path: &Path, text: &str) -> Result<OmniclassCode, SeedError> {
    OmniclassCode::parse_in(text, OmniclassTable::Products)
        .map_err(|e| SeedError::Parse { path: path.to_path_buf(), message: e.to_string() })
}

/// Per-category counts of the equipment file, split into itemized and
/// dashboard-support categories. Rows of unknown types are an error.
fn count_file(manifest: &SeedManifest, path: &Path) -> Result<(BTreeMap<String, usize>, BTreeMap<String, usize>), SeedError> {
    let file = File::open(path).map_err(|e| SeedError::unreadable(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let type_col = EQUIPMENT_HEADER.iter().position(|h| *h == "OMNICLASS_TYPE").expect("type column");
    let (mut items, mut support) = (BTreeMap::new(), BTreeMap::new());
    for record in reader.records() {
        let record = record.map_err(|e| SeedError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        let code = parse_type(path, record.get(type_col).unwrap_or_default())?;
        let (category, is_support) = manifest
            .category_of(&code.number())
            .ok_or_else(|| SeedError::ManifestMismatch(format!("type {code} has no manifest category")))?;
        *(if is_support { &mut support } else { &mut items }).entry(category.to_string()).or_insert(0) += 1;
    }
    Ok((items, support))
}

fn compare(what: &str, expected: &BTreeMap<String, usize>, found: &BTreeMap<String, usize>) -> Result<(), SeedError> {
    let keys: std::collections::BTreeSet<&String> = expected.keys().chain(found.keys()).collect();
    let diffs: Vec<String> = keys
        .into_iter()
        .filter_map(|k| {
            let (e, f) = (expected.get(k).copied().unwrap_or(0), found.get(k).copied().unwrap_or(0));
            (e != f).then(|| format!("{k}: expected {e}, found {f}"))
        })
        .collect();
    if diffs.is_empty() {
        Ok(())
    } else {
        Err(SeedError::ManifestMismatch(format!("{what}: {}", diffs.join("; "))))
    }
}

/// Per-category equipment counts currently in the graph, by manifest type.
pub fn category_counts(store: &TwinStore, manifest: &SeedManifest) -> BTreeMap<String, usize> {
    let mut out: BTreeMap<String, usize> = manifest.category_types.keys().map(|c| (c.clone(), 0)).collect();
    for item in store.graph().equipment.values() {
        if let Some((category, false)) = manifest.category_of(&item.omniclass_type.number()) {
            *out.entry(category.to_string()).or_insert(0) += 1;
        }
    }
    out
}

fn parse_resources(text: &str) -> Result<Vec<Resource>, String> {
    text.split('|')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|entry| {
            let (name, qty) = entry.rsplit_once(':').ok_or_else(|| format!("resource {entry:?} lacks a quantity"))?;
            let quantity = qty.trim().parse::<f64>().map_err(|e| format!("resource {entry:?}: {e}"))?;
            Ok(Resource { name: name.trim().to_string(), quantity })
        })
        .collect()
}

/// Loads the fixture set at `dir` into `store`. Counts in the equipment file
/// are checked against the manifest before anything is committed; a repeat
/// load over a seeded store commits nothing.
pub fn load_seed(store: &mut TwinStore, dir: &Path) -> Result<SeedReport, SeedError> {
    load_seed_with(store, dir, &PlatformDefaults::builtin())
}

pub fn load_seed_with(store: &mut TwinStore, dir: &Path, defaults: &PlatformDefaults) -> Result<SeedReport, SeedError> {
    let manifest = SeedManifest::from_path(&dir.join("manifest.json"))?;
    let spaces_path = dir.join("spaces.csv");
    let equipment_path = dir.join("equipment.csv");

    let (items, support) = count_file(&manifest, &equipment_path)?;
    compare("equipment", &manifest.equipment_counts, &items)?;
    compare("dashboard support equipment", &manifest.dashboard_support_counts, &support)?;
    let total: usize = items.values().sum();
    if total != manifest.equipment_total {
        return Err(SeedError::ManifestMismatch(format!("equipment total: expected {}, found {total}", manifest.equipment_total)));
    }

    let start_seq = store.last_seq();
    let at = manifest.as_of;
    let ingest = load_inventory(
        store,
        at,
        Some(&spaces_path),
        Some(&equipment_path),
        IngestOptions { strict: true, ..IngestOptions::default() },
    )?;
    if ingest.aborted || ingest.has_errors() {
        let first: Vec<String> = ingest.violations.iter().take(5).map(|v| format!("row {}: {}", v.row, v.message)).collect();
        return Err(SeedError::Rejected(first.join("; ")));
    }
    if store.graph().spaces.len() < manifest.space_count {
        return Err(SeedError::ManifestMismatch(format!(
            "spaces: expected {}, found {}",
            manifest.space_count,
            store.graph().spaces.len()
        )));
    }

    let rules_path = dir.join("rules.csv");
    let mut rules: BTreeMap<(OmniclassCode, SensorKind), RuleRow> = BTreeMap::new();
    for row in read_rows::<RuleRow>(&rules_path)? {
        rules.insert((parse_type(&rules_path, &row.equipment_type)?, row.kind), row);
    }

    let sensors_path = dir.join("sensors.csv");
    for row in read_rows::<SensorRow>(&sensors_path)? {
        let code = parse_type(&sensors_path, &row.equipment_type)?;
        let targets: Vec<String> = store
            .graph()
            .equipment
            .values()
            .filter(|e| e.omniclass_type == code)
            .map(|e| e.augment_id_instance.clone())
            .collect();
        for equipment_id in targets {
            let sensor_id = format!("S-{equipment_id}-{}", row.kind);
            let mut spec = defaults.spec_for(&sensor_id, &equipment_id, row.kind).ok_or_else(|| SeedError::Parse {
                path: sensors_path.clone(),
                message: format!("no defaults for sensor kind {}", row.kind),
            })?;
            spec.dashboard_support = row.dashboard_support;
            spec.live_capable = row.live_capable;
            spec.interval_s = row.interval_s.unwrap_or(spec.interval_s);
            spec.normal_range.low = row.low.unwrap_or(spec.normal_range.low);
            spec.normal_range.high = row.high.unwrap_or(spec.normal_range.high);
            if let SimProfile::Signal { baseline, diurnal_amplitude, noise_sigma, .. } = &mut spec.sim_profile {
                *baseline = row.baseline.unwrap_or(*baseline);
                *diurnal_amplitude = row.diurnal_amplitude.unwrap_or(*diurnal_amplitude);
                *noise_sigma = row.noise_sigma.unwrap_or(*noise_sigma);
            }
            let rule = rules.get(&(code.clone(), row.kind)).map(|r| AlarmRule {
                sensor_id: sensor_id.clone(),
                low: r.low,
                high: r.high,
                raise_debounce: r.raise_debounce,
                clear_debounce: r.clear_debounce,
            });
            store.bind_sensor(at, spec, rule, &defaults.alarm)?;
        }
    }

    let policies_path = dir.join("policies.csv");
    for row in read_rows::<PolicyRow>(&policies_path)? {
        let target = match row.target_type.as_str() {
            "equipment_type" => PolicyTarget::EquipmentType(parse_type(&policies_path, &row.target)?),
            "room" => PolicyTarget::Room(row.target.clone()),
            other => {
                return Err(SeedError::Parse { path: policies_path, message: format!("unknown target type {other:?}") });
            }
        };
        let resources =
            parse_resources(&row.resources).map_err(|message| SeedError::Parse { path: policies_path.clone(), message })?;
        store.create_policy(
            at,
            MaintenancePolicy {
                policy_id: row.policy_id,
                target,
                tasks: row.tasks.split('|').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect(),
                frequency_days: row.frequency_days,
                start_date: row.start_date,
                resources,
            },
        )?;
    }

    let graph = store.graph();
    let counts = category_counts(store, &manifest);
    compare("equipment in graph", &manifest.equipment_counts, &counts)?;
    let sensor_bindings = graph.sensors.values().filter(|s| !s.dashboard_support).count();
    let dashboard_sensors = graph.sensors.len() - sensor_bindings;
    let checks = [
        ("sensor bindings", manifest.sensor_binding_count, sensor_bindings),
        ("dashboard sensors", manifest.dashboard_sensor_count, dashboard_sensors),
        ("policies", manifest.policy_count, graph.policies.len()),
    ];
    for (what, expected, found) in checks {
        if expected != found {
            return Err(SeedError::ManifestMismatch(format!("{what}: expected {expected}, found {found}")));
        }
    }

    Ok(SeedReport {
        category_counts: counts,
        sensor_bindings,
        dashboard_sensors,
        policies: graph.policies.len(),
        events_committed: store.last_seq() - start_seq,
        manifest,
        ingest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resources_parse() {
        let r = parse_resources("oil filter:1| filter set : 4").unwrap();
        assert_eq!(r, vec![Resource { name: "oil filter".into(), quantity: 1.0 }, Resource { name: "filter set".into(), quantity: 4.0 }]);
        assert!(parse_resources("").unwrap().is_empty());
        assert!(parse_resources("bolt").is_err());
    }

    #[test]
    fn bundled_manifest_reads() {
        let m = SeedManifest::from_path(&builtin_seed_dir().join("manifest.json")).unwrap();
        assert_eq!(m.equipment_counts.len(), 19);
        assert_eq!(m.equipment_counts.values().sum::<usize>(), m.equipment_total);
    }
}
