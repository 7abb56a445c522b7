//! Per-kind defaults for units, intervals, normal ranges and simulation
//! profiles, plus alarm debounce defaults. Values are placeholders for the
//! simulated fleet and are loaded from `config/defaults.json`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NormalRange, SensorKind, SensorSpec, SimProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlarmDefaults {
    pub raise_debounce: u32,
    pub clear_debounce: u32,
}

impl Default for AlarmDefaults {
    fn default() -> Self {
        PlatformDefaults::builtin().alarm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindDefaults {
    pub unit: String,
    pub interval_s: u32,
    pub normal_range: (f64, f64),
    pub profile: SimProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformDefaults {
    pub alarm: AlarmDefaults,
    pub sensor_kinds: BTreeMap<SensorKind, KindDefaults>,
}

const BUILTIN: &str = include_str!("../../config/defaults.json");

impl PlatformDefaults {
    pub fn builtin() -> Self {
        serde_json::from_str(BUILTIN).expect("bundled defaults.json is valid")
    }

    pub fn from_path(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn kind(&self, kind: SensorKind) -> Option<&KindDefaults> {
        self.sensor_kinds.get(&kind)
    }

    /// A spec for `kind` built entirely from defaults.
    pub fn spec_for(&self, sensor_id: &str, equipment_id: &str, kind: SensorKind) -> Option<SensorSpec> {
        let d = self.kind(kind)?;
        Some(SensorSpec {
            sensor_id: sensor_id.to_string(),
            bound_equipment: equipment_id.to_string(),
            kind,
            unit: d.unit.clone(),
            interval_s: d.interval_s,
            normal_range: NormalRange { low: d.normal_range.0, high: d.normal_range.1 },
            sim_profile: d.profile.clone(),
            live_capable: kind == SensorKind::Occupancy,
            dashboard_support: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_covers_every_kind_with_valid_specs() {
        let d = PlatformDefaults::builtin();
        assert_eq!(d.alarm, AlarmDefaults { raise_debounce: 1, clear_debounce: 3 });
        for kind in SensorKind::ALL {
            let spec = d.spec_for("s", "e", kind).unwrap_or_else(|| panic!("missing {kind}"));
            spec.validate().unwrap();
        }
    }
}
