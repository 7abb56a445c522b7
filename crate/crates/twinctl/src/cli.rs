use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use twin_core::graph::{LogError, TwinStore};
use twin_core::ingest::{load_inventory, IngestOptions};
use twin_core::par::Execution;
use twin_core::reporting::{full_report, ReportWindow};
use twin_core::scanplan::{validate_plan, FloorOutline, ScanPlan};
use twin_core::seed::{builtin_seed_dir, load_seed, SeedError};
use twin_core::telemetry::SimulationWindow;
use twin_core::Timestamp;

use crate::api::{parse_instant, DEFAULT_SIMULATION_START};
use crate::app::pace;
use crate::config::ServiceConfig;
use crate::server;

pub const EXIT_OK: u8 = 0;
pub const EXIT_STRUCTURAL: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "twinctl", version, about = "Facility digital twin: inventory, telemetry, maintenance and reporting")]
pub struct Cli {
    /// Event log file.
    #[arg(long, global = true, value_name = "PATH")]
    pub log: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load the bundled fixture set (or another seed directory) into the log.
    Seed {
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    /// Load space and equipment inventory files.
    Ingest {
        #[arg(long)]
        spaces: Option<PathBuf>,
        #[arg(long)]
        equipment: Option<PathBuf>,
        /// Commit nothing if any row is invalid.
        #[arg(long)]
        strict: bool,
        /// Commit timestamp (RFC 3339); defaults to now.
        #[arg(long)]
        at: Option<String>,
    },
    /// Validate a laser-scan plan against a floor outline.
    Scanplan {
        #[arg(long)]
        floor: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value_t = 0.99)]
        min_coverage: f64,
        #[arg(long, default_value_t = 1.0)]
        grid_step: f64,
        #[arg(long)]
        sequential: bool,
    },
    /// Generate and commit simulated readings for every bound sensor.
    Simulate {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        hours: f64,
        /// Pace commits at this multiple of real time; omitted runs unpaced.
        #[arg(long)]
        speedup: Option<f64>,
        #[arg(long, default_value = DEFAULT_SIMULATION_START)]
        start: String,
    },
    /// Maintenance job commands.
    Jobs {
        #[command(subcommand)]
        command: JobsCommand,
    },
    /// Maintenance, equipment health and staff activity over a window.
    Report {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
        format: ReportFormat,
    },
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum JobsCommand {
    /// Expand every preventive policy over `[from, to]`.
    Generate {
        #[arg(long)]
        from: NaiveDate,
        #[arg(long)]
        to: NaiveDate,
        #[arg(long)]
        at: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// JSON service config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub port: Option<u32>,
    #[arg(long)]
    pub ingest_port: Option<u32>,
    #[arg(long)]
    pub building: Option<String>,
    #[arg(long)]
    pub seed_dir: Option<PathBuf>,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    #[arg(long)]
    pub cors_origin: Option<String>,
}

const DEFAULT_LOG: &str = "twin-events.jsonl";

/// A failed command: message plus exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

fn structural(e: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_STRUCTURAL, message: e.to_string() }
}

fn validation(e: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_VALIDATION, message: e.to_string() }
}

fn print_json(value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(structural)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(structural)
}

fn open_log(cli_log: &Option<PathBuf>) -> Result<TwinStore, Failure> {
    let path = cli_log.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_LOG));
    TwinStore::open(&path).map_err(|e: LogError| structural(e))
}

fn instant(field: &str, value: Option<&str>) -> Result<Timestamp, Failure> {
    match value {
        Some(v) => parse_instant(field, v).map_err(|e| validation(e.message)),
        None => Ok(Timestamp::now()),
    }
}

/// Runs a parsed command and returns its exit code.
pub fn run(cli: Cli) -> u8 {
    let result = match cli.command {
        Command::Seed { dir } => seed(&cli.log, dir),
        Command::Ingest { spaces, equipment, strict, at } => ingest(&cli.log, spaces, equipment, strict, at),
        Command::Scanplan { floor, plan, min_coverage, grid_step, sequential } => {
            scanplan(floor, plan, min_coverage, grid_step, sequential)
        }
        Command::Simulate { seed, hours, speedup, start } => simulate(&cli.log, seed, hours, speedup, &start),
        Command::Jobs { command: JobsCommand::Generate { from, to, at } } => generate(&cli.log, from, to, at),
        Command::Report { from, to, format } => report(&cli.log, &from, &to, format),
        Command::Serve(args) => serve(cli.log, args),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn main() -> ExitCode {
    ExitCode::from(run(Cli::parse()))
}

fn seed(log: &Option<PathBuf>, dir: Option<PathBuf>) -> Result<u8, Failure> {
    let mut store = open_log(log)?;
    let dir = dir.unwrap_or_else(builtin_seed_dir);
    let report = load_seed(&mut store, &dir).map_err(|e| match e {
        SeedError::ManifestMismatch(_) | SeedError::Rejected(_) => validation(e),
        other => structural(other),
    })?;
    print_json(&report)?;
    Ok(EXIT_OK)
}

fn ingest(log: &Option<PathBuf>, spaces: Option<PathBuf>, equipment: Option<PathBuf>, strict: bool, at: Option<String>) -> Result<u8, Failure> {
    if spaces.is_none() && equipment.is_none() {
        return Err(structural("nothing to ingest: pass --spaces and/or --equipment"));
    }
    let at = instant("at", at.as_deref())?;
    let mut store = open_log(log)?;
    let options = IngestOptions { strict, exec: Execution::Parallel };
    let report = load_inventory(&mut store, at, spaces.as_deref(), equipment.as_deref(), options).map_err(structural)?;
    print_json(&report)?;
    Ok(if report.has_errors() { EXIT_VALIDATION } else { EXIT_OK })
}

fn scanplan(floor: PathBuf, plan: PathBuf, min_coverage: f64, grid_step: f64, sequential: bool) -> Result<u8, Failure> {
    let floor = FloorOutline::from_geojson_file(&floor).map_err(structural)?;
    let plan = ScanPlan::from_json_file(&plan).map_err(structural)?;
    let exec = if sequential { Execution::Sequential } else { Execution::Parallel };
    let report = validate_plan(&floor, &plan, min_coverage, grid_step, exec).map_err(structural)?;
    print_json(&report)?;
    Ok(if report.passed { EXIT_OK } else { EXIT_VALIDATION })
}

fn simulate(log: &Option<PathBuf>, seed: u64, hours: f64, speedup: Option<f64>, start: &str) -> Result<u8, Failure> {
    if !(hours > 0.0 && hours.is_finite()) {
        return Err(validation(format!("--hours must be positive, got {hours}")));
    }
    let start = parse_instant("start", start).map_err(|e| validation(e.message))?;
    let mut store = open_log(log)?;
    let window = SimulationWindow::hours(start, hours);
    let mut previous = start;
    let summary = store
        .run_simulation(seed, window, Execution::Parallel, |r| {
            if let Some(speedup) = speedup.filter(|s| *s > 0.0) {
                std::thread::sleep(pace(previous, r.at, speedup));
                previous = r.at;
            }
        })
        .map_err(validation)?;
    print_json(&summary)?;
    Ok(EXIT_OK)
}

fn generate(log: &Option<PathBuf>, from: NaiveDate, to: NaiveDate, at: Option<String>) -> Result<u8, Failure> {
    let at = instant("at", at.as_deref())?;
    let mut store = open_log(log)?;
    let summary = store.generate_all_jobs(at, from, to).map_err(validation)?;
    print_json(&summary)?;
    Ok(EXIT_OK)
}

fn report(log: &Option<PathBuf>, from: &str, to: &str, format: ReportFormat) -> Result<u8, Failure> {
    let from = parse_instant("from", from).map_err(|e| validation(e.message))?;
    let to = parse_instant("to", to).map_err(|e| validation(e.message))?;
    let window = ReportWindow::span(from, to).map_err(validation)?;
    let store = open_log(log)?;
    let report = full_report(store.graph(), &window);
    match format {
        ReportFormat::Json => print_json(&report)?,
        ReportFormat::Csv => print!("{}", report.to_csv()),
    }
    Ok(EXIT_OK)
}

fn serve(log: Option<PathBuf>, args: ServeArgs) -> Result<u8, Failure> {
    let mut config = match &args.config {
        Some(path) => ServiceConfig::from_path(path).map_err(structural)?,
        None => ServiceConfig::default(),
    };
    if let Some(log) = log {
        config.event_log_path = log;
    }
    if let Some(p) = args.port {
        config.listen_port = p;
    }
    if args.ingest_port.is_some() {
        config.ingest_port = args.ingest_port;
    }
    if let Some(b) = args.building {
        config.building_id = b;
    }
    if args.seed_dir.is_some() {
        config.seed_data_dir = args.seed_dir;
    }
    if args.registry.is_some() {
        config.metric_registry_path = args.registry;
    }
    if args.cors_origin.is_some() {
        config.cors_allowed_origin = args.cors_origin;
    }
    let runtime = tokio::runtime::Runtime::new().map_err(structural)?;
    runtime
        .block_on(server::serve(config, async {
            let _ = tokio::signal::ctrl_c().await;
        }))
        .map_err(structural)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_simulate() {
        let cli = Cli::try_parse_from(["twinctl", "--log", "x.jsonl", "simulate", "--seed", "42", "--hours", "2"]).unwrap();
        match cli.command {
            Command::Simulate { seed, hours, speedup, start } => {
                assert_eq!((seed, hours, speedup), (42, 2.0, None));
                assert_eq!(start, DEFAULT_SIMULATION_START);
            }
            other => panic!("{other:?}"),
        }
    }
}
