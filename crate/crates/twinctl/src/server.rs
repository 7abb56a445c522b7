use std::future::Future;
use std::net::SocketAddr;

use axum::http::{HeaderValue, Method};
use axum::Router;
use tokio::net::TcpListener;
use tower_http::cors::{Any, CorsLayer};
use twin_core::graph::{LogError, TwinStore};
use twin_core::reporting::MetricRegistry;
use twin_core::seed::{load_seed, SeedError};

use crate::api;
use crate::app::{App, SharedApp};
use crate::config::{ConfigError, ServiceConfig};
use crate::tcp;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("event log is corrupt: {0}")]
    CorruptLog(LogError),
    #[error(transparent)]
    Log(LogError),
    #[error("metric registry: {0}")]
    Registry(String),
    #[error("seed load failed: {0}")]
    Seed(#[from] SeedError),
    #[error("port {0} is already in use")]
    PortInUse(u32),
    #[error("invalid CORS origin {0:?}")]
    BadOrigin(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<LogError> for ServeError {
    fn from(e: LogError) -> Self {
        match e {
            LogError::Io { .. } => ServeError::Log(e),
            other => ServeError::CorruptLog(other),
        }
    }
}

/// Opens and replays the log, loading the seed into an empty one.
pub fn open_app(config: &ServiceConfig) -> Result<App, ServeError> {
    config.validate()?;
    let mut store = TwinStore::open(&config.event_log_path)?;
    if config.snapshot_every > 0 {
        store = store.with_snapshot_every(config.snapshot_every);
    }
    if let Some(dir) = &config.seed_data_dir {
        if store.last_seq() == 0 {
            let report = load_seed(&mut store, dir)?;
            tracing::info!(events = report.events_committed, "seed loaded");
        }
    }
    let registry = match &config.metric_registry_path {
        Some(path) => MetricRegistry::from_path(path).map_err(ServeError::Registry)?,
        None => MetricRegistry::builtin(),
    };
    Ok(App::new(store, registry, config.building_id.clone(), config.stream_buffer))
}

pub fn build_router(app: SharedApp, cors_origin: Option<&str>) -> Result<Router, ServeError> {
    let router = api::router(app);
    let Some(origin) = cors_origin else { return Ok(router) };
    let cors = CorsLayer::new().allow_methods([Method::GET, Method::POST]).allow_headers(Any);
    let cors = if origin == "*" {
        cors.allow_origin(Any)
    } else {
        cors.allow_origin(HeaderValue::from_str(origin).map_err(|_| ServeError::BadOrigin(origin.to_string()))?)
    };
    Ok(router.layer(cors))
}

async fn bind(port: u32) -> Result<TcpListener, ServeError> {
    let addr = SocketAddr::from(([0, 0, 0, 0], port as u16));
    TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => ServeError::PortInUse(port),
        _ => ServeError::Io(e),
    })
}

/// Runs the HTTP service (and the line ingest listener when configured)
/// until `shutdown` resolves, then flushes the log and writes a snapshot.
pub async fn serve(config: ServiceConfig, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServeError> {
    let app = open_app(&config)?.shared();
    let router = build_router(app.clone(), config.cors_allowed_origin.as_deref())?;
    let listener = bind(config.listen_port).await?;
    let ingest = match config.ingest_port {
        Some(port) => Some(tokio::spawn(tcp::run_line_ingest(bind(port).await?, app.clone()))),
        None => None,
    };
    tracing::info!(port = config.listen_port, ingest_port = ?config.ingest_port, last_seq = app.read(|s| s.last_seq()), "serving");
    let closer = app.clone();
    let shutdown = async move {
        shutdown.await;
        closer.close();
    };
    let result = axum::serve(listener, router).with_graceful_shutdown(shutdown).await;
    if let Some(task) = ingest {
        task.abort();
    }
    app.flush()?;
    result.map_err(ServeError::Io)
}
