use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use serde::Serialize;
use tokio::sync::{broadcast, watch};
use twin_core::graph::{EventBody, TwinStore};
use twin_core::par::Execution;
use twin_core::reporting::MetricRegistry;
use twin_core::telemetry::{
    generate_readings, PlatformDefaults, ReadingSource, SensorKind, SimulationSummary, SimulationWindow, TelemetryError,
};
use twin_core::Timestamp;

/// One committed reading as delivered to stream subscribers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamReading {
    pub seq: u64,
    pub at: Timestamp,
    pub sensor_id: String,
    pub equipment_id: String,
    pub kind: SensorKind,
    pub value: f64,
    pub unit: String,
    pub source: ReadingSource,
}

type Clock = Box<dyn Fn() -> Timestamp + Send + Sync>;

/// Shared service state: the single-writer store plus the reading feed.
pub struct App {
    store: Mutex<TwinStore>,
    feed: broadcast::Sender<Arc<StreamReading>>,
    closing: watch::Sender<bool>,
    registry: MetricRegistry,
    defaults: PlatformDefaults,
    building_id: String,
    clock: Clock,
}

pub type SharedApp = Arc<App>;

impl App {
    pub fn new(store: TwinStore, registry: MetricRegistry, building_id: impl Into<String>, stream_buffer: usize) -> Self {
        let (feed, _) = broadcast::channel(stream_buffer.max(1));
        Self {
            store: Mutex::new(store),
            feed,
            closing: watch::Sender::new(false),
            registry,
            defaults: PlatformDefaults::builtin(),
            building_id: building_id.into(),
            clock: Box::new(Timestamp::now),
        }
    }

    /// Replaces the wall clock used to stamp API writes.
    pub fn with_clock(mut self, clock: impl Fn() -> Timestamp + Send + Sync + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    pub fn shared(self) -> SharedApp {
        Arc::new(self)
    }

    pub fn now(&self) -> Timestamp {
        (self.clock)()
    }

    pub fn building_id(&self) -> &str {
        &self.building_id
    }

    pub fn registry(&self) -> &MetricRegistry {
        &self.registry
    }

    pub fn defaults(&self) -> &PlatformDefaults {
        &self.defaults
    }

    fn lock(&self) -> MutexGuard<'_, TwinStore> {
        self.store.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    pub fn read<R>(&self, f: impl FnOnce(&TwinStore) -> R) -> R {
        f(&self.lock())
    }

    /// Runs a mutation and publishes every reading it committed, in commit
    /// order, before releasing the writer lock.
    pub fn write<R>(&self, f: impl FnOnce(&mut TwinStore) -> R) -> R {
        let mut store = self.lock();
        let before = store.last_seq();
        let out = f(&mut store);
        if self.feed.receiver_count() > 0 {
            let graph = store.graph();
            for event in store.events_since(before) {
                let EventBody::ReadingIngested(r) = &event.body else { continue };
                let Some(spec) = graph.sensors.get(&r.sensor_id) else { continue };
                let _ = self.feed.send(Arc::new(StreamReading {
                    seq: event.seq,
                    at: r.at,
                    sensor_id: r.sensor_id.clone(),
                    equipment_id: spec.bound_equipment.clone(),
                    kind: spec.kind,
                    value: r.value,
                    unit: spec.unit.clone(),
                    source: r.source,
                }));
            }
        }
        out
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Arc<StreamReading>> {
        self.feed.subscribe()
    }

    /// Resolves once [`App::close`] has been called.
    pub fn closed(&self) -> impl std::future::Future<Output = ()> + Send + 'static {
        let mut rx = self.closing.subscribe();
        async move {
            let _ = rx.wait_for(|closed| *closed).await;
        }
    }

    /// Ends every open stream.
    pub fn close(&self) {
        self.closing.send_replace(true);
    }

    /// Flushes the log and writes a snapshot.
    pub fn flush(&self) -> std::io::Result<()> {
        let mut store = self.lock();
        store.flush()?;
        store.write_snapshot()
    }

    /// Commits simulated readings for `window`. With `speedup`, each reading
    /// waits for its simulated time divided by the factor; the writer lock is
    /// released between readings.
    pub fn simulate(&self, seed: u64, window: SimulationWindow, speedup: Option<f64>) -> Result<SimulationSummary, TelemetryError> {
        let Some(speedup) = speedup.filter(|s| *s > 0.0) else {
            return self.write(|s| s.run_simulation(seed, window, Execution::Parallel, |_| {}));
        };
        let readings = self.read(|s| {
            if s.graph().sensors.is_empty() {
                return Err(TelemetryError::NoSensors);
            }
            generate_readings(s.graph(), seed, window, Execution::Parallel)
        })?;
        let first_seq = self.read(|s| s.last_seq()) + 1;
        let mut summary = SimulationSummary { readings: 0, alarms_raised: 0, alarms_cleared: 0, first_seq, last_seq: 0 };
        let mut previous = window.start;
        for reading in readings {
            std::thread::sleep(pace(previous, reading.at, speedup));
            previous = reading.at;
            let outcome = self.write(|s| s.record_reading(reading))?;
            summary.readings += 1;
            match outcome.alarm.as_ref().map(|a| a.is_active()) {
                Some(true) => summary.alarms_raised += 1,
                Some(false) => summary.alarms_cleared += 1,
                None => {}
            }
        }
        summary.last_seq = self.read(|s| s.last_seq());
        Ok(summary)
    }
}

/// Wall-clock wait between two simulated instants.
pub fn pace(from: Timestamp, to: Timestamp, speedup: f64) -> Duration {
    let secs = (to.epoch_seconds() - from.epoch_seconds()).max(0) as f64 / speedup;
    Duration::from_secs_f64(secs)
}
