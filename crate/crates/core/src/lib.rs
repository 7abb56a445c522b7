//! Facility digital twin core.
//!
//! The [`graph::TwinStore`] owns an append-only event log and the
//! [`graph::TwinGraph`] rebuilt from it. Every other module reads the graph
//! and writes through the store:
//!
//! - [`omniclass`] and [`ingest`] turn tabular inventory into spaces and equipment.
//! - [`telemetry`] binds sensors, simulates and ingests readings.
//! - [`alarms`] evaluates readings against threshold rules.
//! - [`maintenance`] expands policies into jobs and runs the job workflow.
//! - [`reporting`] aggregates all of the above.
//! - [`scanplan`] validates laser-scan plans and is independent of the graph.
//! - [`seed`] loads the bundled fixture set.

pub mod alarms;
pub mod graph;
pub mod ingest;
pub mod maintenance;
pub mod omniclass;
pub mod par;
pub mod reporting;
pub mod scanplan;
pub mod seed;
pub mod telemetry;
pub mod time;

pub use graph::{TwinGraph, TwinStore};
pub use par::Execution;
pub use time::Timestamp;
