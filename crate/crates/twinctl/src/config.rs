use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Unreadable { path: PathBuf, message: String },
    #[error("listen port must be in 1..=65535, got {0}")]
    BadPort(u32),
    #[error("building id must be a single non-empty topic segment, got {0:?}")]
    BadBuilding(String),
    #[error("{0} is not a directory")]
    NotADirectory(PathBuf),
}

/// Service settings. Every field has a default so a config file may list
/// only what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen_port: u32,
    /// Plain-TCP line ingest port; `None` disables the listener.
    pub ingest_port: Option<u32>,
    pub building_id: String,
    pub event_log_path: PathBuf,
    /// Loaded into an empty log at startup.
    pub seed_data_dir: Option<PathBuf>,
    pub metric_registry_path: Option<PathBuf>,
    pub cors_allowed_origin: Option<String>,
    /// Events between automatic snapshots; 0 disables them.
    pub snapshot_every: u64,
    /// Per-subscriber stream buffer; subscribers further behind are dropped.
    pub stream_buffer: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen_port: 8080,
            ingest_port: None,
            building_id: "pgb".into(),
            event_log_path: PathBuf::from("twin-events.jsonl"),
            seed_data_dir: None,
            metric_registry_path: None,
            cors_allowed_origin: None,
            snapshot_every: 10_000,
            stream_buffer: 1024,
        }
    }
}

impl ServiceConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let unreadable = |message: String| ConfigError::Unreadable { path: path.to_path_buf(), message };
        let text = std::fs::read_to_string(path).map_err(|e| unreadable(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| unreadable(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for port in std::iter::once(self.listen_port).chain(self.ingest_port) {
            if !(1..=65535).contains(&port) {
                return Err(ConfigError::BadPort(port));
            }
        }
        if self.building_id.is_empty() || self.building_id.contains('/') {
            return Err(ConfigError::BadBuilding(self.building_id.clone()));
        }
        if let Some(dir) = &self.seed_data_dir {
            if !dir.is_dir() {
                return Err(ConfigError::NotADirectory(dir.clone()));
            }
        }
        Ok(())
    }
}
