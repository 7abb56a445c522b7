//! Deterministic sensor simulation.
//!
//! Noise comes from a counter-based generator: each sample seeds a fresh
//! ChaCha stream from a hash of `(seed, sensor_id, timestamp)`, so any sample
//! can be produced independently and in any order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{ReadingSource, SensorReading, SensorSpec, SimProfile, TelemetryError};
use crate::graph::TwinGraph;
use crate::par::{self, Execution};
use crate::time::{Timestamp, SECONDS_PER_DAY};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Stable 64-bit key for one sample.
pub fn counter_key(seed: u64, sensor_id: &str, at: Timestamp) -> u64 {
    let id_hash = sensor_id
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME));
    splitmix64(splitmix64(seed ^ id_hash) ^ at.epoch_seconds() as u64)
}

/// One simulated reading. `at` must lie on the sensor's interval grid.
pub fn next_reading(spec: &SensorSpec, at: Timestamp, seed: u64) -> Result<SensorReading, TelemetryError> {
    if !spec.is_on_grid(at) {
        return Err(TelemetryError::OffGridTimestamp { at, interval_s: spec.interval_s });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(counter_key(seed, &spec.sensor_id, at));
    let value = match &spec.sim_profile {
        SimProfile::Signal { baseline, diurnal_amplitude, noise_sigma, resolution } => {
            let phase = 2.0 * std::f64::consts::PI * at.seconds_of_day() as f64 / SECONDS_PER_DAY as f64;
            let noise = if *noise_sigma > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                noise_sigma * z
            } else {
                0.0
            };
            let raw = baseline + diurnal_amplitude * phase.sin() + noise;
            match resolution {
                Some(step) => (raw / step).round() * step,
                None => raw,
            }
        }
        SimProfile::Occupancy { occupied_from_hour, occupied_to_hour, p_occupied, p_unoccupied } => {
            let hour = (at.seconds_of_day() / 3600) as u32;
            let occupied_hours = if occupied_from_hour <= occupied_to_hour {
                (*occupied_from_hour..*occupied_to_hour).contains(&hour)
            } else {
                hour >= *occupied_from_hour || hour < *occupied_to_hour
            };
            let p = if occupied_hours { *p_occupied } else { *p_unoccupied };
            let u: f64 = rng.random();
            if u < p { 1.0 } else { 0.0 }
        }
    };
    Ok(SensorReading { sensor_id: spec.sensor_id.clone(), at, value, source: ReadingSource::Simulated })
}

/// A closed simulation window `[start, start + duration_s]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimulationWindow {
    pub start: Timestamp,
    pub duration_s: i64,
}

impl SimulationWindow {
    pub fn hours(start: Timestamp, hours: f64) -> Self {
        Self { start, duration_s: (hours * 3600.0).round() as i64 }
    }

    pub fn end(&self) -> Timestamp {
        self.start.plus_seconds(self.duration_s)
    }
}

/// Grid instants (epoch multiples of `interval_s`) inside the closed window.
pub fn grid_times(interval_s: u32, window: SimulationWindow) -> Vec<Timestamp> {
    let step = i64::from(interval_s);
    let start = window.start.epoch_seconds();
    let first = start + (step - start.rem_euclid(step)) % step;
    (first..=window.end().epoch_seconds())
        .step_by(step as usize)
        .map(Timestamp::from_epoch_seconds)
        .collect()
}

/// `⌊window / interval⌋`, plus one when the window opens on the grid.
pub fn expected_reading_count(interval_s: u32, window: SimulationWindow) -> u64 {
    let on_grid = window.start.epoch_seconds().rem_euclid(i64::from(interval_s)) == 0;
    (window.duration_s / i64::from(interval_s)) as u64 + u64::from(on_grid)
}

/// Every simulated reading for every sensor in the graph, sorted by
/// timestamp then sensor id. Per-sensor streams are generated in parallel
/// when `exec` allows.
pub fn generate_readings(
    graph: &TwinGraph,
    seed: u64,
    window: SimulationWindow,
    exec: Execution,
) -> Result<Vec<SensorReading>, TelemetryError> {
    let specs: Vec<&SensorSpec> = graph.sensors.values().collect();
    let streams = par::map(exec, &specs, |spec| {
        grid_times(spec.interval_s, window)
            .into_iter()
            .map(|t| next_reading(spec, t, seed))
            .collect::<Result<Vec<_>, _>>()
    });
    let mut all = Vec::new();
    for stream in streams {
        all.extend(stream?);
    }
    all.sort_by(|a, b| (a.at, &a.sensor_id).cmp(&(b.at, &b.sensor_id)));
    Ok(all)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimulationSummary {
    pub readings: u64,
    pub alarms_raised: u64,
    pub alarms_cleared: u64,
    pub first_seq: u64,
    pub last_seq: u64,
}
