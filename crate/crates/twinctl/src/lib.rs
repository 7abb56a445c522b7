//! Service and command-line front end for the facility twin.
//!
//! - [`api`]: REST routes over the shared store.
//! - [`stream`]: live readings as server-sent events.
//! - [`tcp`]: plain-TCP line ingest for the pub/sub wire format.
//! - [`server`]: startup, replay and graceful shutdown.
//! - [`cli`]: the `twinctl` verbs.

pub mod api;
pub mod app;
pub mod cli;
pub mod config;
pub mod error;
pub mod server;
pub mod stream;
pub mod tcp;

pub use app::{App, SharedApp, StreamReading};
pub use config::ServiceConfig;
