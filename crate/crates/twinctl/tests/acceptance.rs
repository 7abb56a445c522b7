//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use axum::body::Body as HttpBody;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use chrono::{Days, NaiveDate};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tower::ServiceExt;
use twin_core::alarms::{evaluate, AlarmRule, AlarmTransition, RuleState};
use twin_core::graph::{EventBody, TwinStore};
use twin_core::maintenance::{occurrences, JobStatus, JobTarget, MaintenanceError};
use twin_core::omniclass::OmniclassCode;
use twin_core::par::Execution;
use twin_core::reporting::{equipment_health, maintenance_summary, staff_activity, MetricRegistry, ReportWindow};
use twin_core::scanplan::{coverage_fraction, overlap_graph, FloorOutline, Point, Ring, ScanPlan};
use twin_core::seed::{builtin_seed_dir, load_seed, SeedManifest};
use twin_core::telemetry::{expected_reading_count, ReadingSource, SensorReading, SimulationWindow};
use twin_core::Timestamp;
use twinctl::server::{build_router, open_app};
use twinctl::{SharedApp, ServiceConfig};

type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn seeded() -> TwinStore {
    let mut store = TwinStore::in_memory();
    load_seed(&mut store, &builtin_seed_dir()).unwrap();
    store
}

fn ts(s: &str) -> Timestamp {
    s.parse().unwrap()
}

fn d(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

/// Itemized inventory of the case-study building.
const ITEMIZED: [(&str, usize); 19] = [
    ("AHU", 3),
    ("ERU", 1),
    ("VAV", 1),
    ("hot water pumps", 2),
    ("temperature sensors", 30),
    ("humidity sensors", 20),
    ("CO sensors", 20),
    ("lighting fixtures", 300),
    ("transformers", 2),
    ("faucets", 16),
    ("sinks", 16),
    ("toilets", 16),
    ("urinals", 8),
    ("service sinks", 4),
    ("water heaters", 8),
    ("drinking fountains", 2),
    ("elevators", 2),
    ("generator", 1),
    ("occupancy sensors", 60),
];
const HEADLINE_TOTAL: usize = 509;

fn seed_inventory_fidelity() -> Outcome {
    let started = Instant::now();
    let store = seeded();
    let elapsed = started.elapsed();
    let manifest = SeedManifest::from_path(&builtin_seed_dir().join("manifest.json")).map_err(|e| e.to_string())?;
    let mut by_type: BTreeMap<String, usize> = BTreeMap::new();
    for item in store.graph().equipment.values().filter(|e| !e.is_dashboard_support()) {
        *by_type.entry(item.omniclass_type.number()).or_default() += 1;
    }
    for (category, expected) in ITEMIZED {
        let number = manifest.category_types.get(category).ok_or(format!("no type for {category}"))?;
        let got = by_type.get(number).copied().unwrap_or(0);
        ensure!(got == expected, "{category}: {got} != {expected}");
    }
    let total: usize = by_type.values().sum();
    let itemized: usize = ITEMIZED.iter().map(|c| c.1).sum();
    ensure!(total == 512 && itemized == 512, "total {total}, itemized {itemized}");
    ensure!(HEADLINE_TOTAL != itemized, "headline total unexpectedly equals the itemized sum");
    ensure!(elapsed.as_secs_f64() < 5.0, "seed load took {elapsed:?}");
    Ok(())
}

fn omniclass_round_trip() -> Outcome {
    for text in [
        "13-55 11 00 Office Spaces",
        "13-23 17 00 Restroom",
        "13-57 17 13 Break Room",
        "23-04 50 Electrical",
        "23-35 47 00 Electrical Lighting",
    ] {
        let code = OmniclassCode::parse(text).map_err(|e| format!("{text}: {e}"))?;
        ensure!(code.to_string() == text, "{text} rendered as {code}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let words = ["Office", "Spaces", "Air", "Handling", "Units", "Men's", "RRs", "Lighting", "2nd", "Floor", "B-1", "(North)"];
    let pad = |rng: &mut ChaCha8Rng| [" ", "  ", "\t", " \t "][rng.random_range(0..4)];
    for _ in 0..1000 {
        let table = if rng.random_bool(0.5) { 13 } else { 23 };
        let levels = rng.random_range(1..=4);
        let mut text = format!("{}{table}-{:02}", pad(&mut rng).trim_start_matches(' '), rng.random_range(0..100));
        for _ in 1..levels {
            text += &format!("{}{:02}", pad(&mut rng), rng.random_range(0..100));
        }
        text += pad(&mut rng);
        let first = words[rng.random_range(0..words.len())];
        let first = if first.starts_with(char::is_numeric) { "Unit" } else { first };
        text += first;
        for _ in 0..rng.random_range(0..3) {
            text += pad(&mut rng);
            text += words[rng.random_range(0..words.len())];
        }
        text += pad(&mut rng);
        let normalized = text.split_whitespace().collect::<Vec<_>>().join(" ");
        let code = OmniclassCode::parse(&text).map_err(|e| format!("{text:?}: {e}"))?;
        ensure!(code.to_string() == normalized, "{text:?} rendered as {code}");
        ensure!(OmniclassCode::parse(&code.to_string()).as_ref() == Ok(&code), "re-parse of {code} differs");
    }
    Ok(())
}

fn pnpoly(v: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut c = false;
    let mut j = v.len() - 1;
    for i in 0..v.len() {
        let ((xi, yi), (xj, yj)) = (v[i], v[j]);
        if ((yi > y) != (yj > y)) && (x < (xj - xi) * (y - yi) / (yj - yi) + xi) {
            c = !c;
        }
        j = i;
    }
    c
}

fn brute_force_cells(exterior: &[(f64, f64)], positions: &[(f64, f64)], r: f64, step: f64) -> (u64, u64) {
    let fold = |f: fn(f64, f64) -> f64, init: f64, pick: fn(&(f64, f64)) -> f64| exterior.iter().map(pick).fold(init, f);
    let (min_x, max_x) = (fold(f64::min, f64::INFINITY, |p| p.0), fold(f64::max, f64::NEG_INFINITY, |p| p.0));
    let (min_y, max_y) = (fold(f64::min, f64::INFINITY, |p| p.1), fold(f64::max, f64::NEG_INFINITY, |p| p.1));
    let (cols, rows) = (((max_x - min_x) / step).ceil() as usize, ((max_y - min_y) / step).ceil() as usize);
    let (mut total, mut covered) = (0, 0);
    for j in 0..rows {
        for i in 0..cols {
            let (x, y) = (min_x + (i as f64 + 0.5) * step, min_y + (j as f64 + 0.5) * step);
            if !pnpoly(exterior, x, y) {
                continue;
            }
            total += 1;
            if positions.iter().any(|&(px, py)| (x - px).powi(2) + (y - py).powi(2) <= r * r) {
                covered += 1;
            }
        }
    }
    (total, covered)
}

fn scan_plan_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut checked = 0;
    while checked < 60 {
        let (cx, cy) = (rng.random_range(30.0..70.0), rng.random_range(30.0..70.0));
        let n = rng.random_range(3..10);
        let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let exterior: Vec<(f64, f64)> = angles
            .iter()
            .map(|a| {
                let r = rng.random_range(10.0..50.0);
                (cx + r * a.cos(), cy + r * a.sin())
            })
            .collect();
        let Ok(floor) = FloorOutline::new(Ring(exterior.iter().map(|&(x, y)| Point::new(x, y)).collect()), vec![]) else { continue };
        let positions: Vec<(f64, f64)> = (0..rng.random_range(0..5)).map(|_| (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0))).collect();
        let r = [10.0, 20.0, 30.0][rng.random_range(0..3)];
        let step = [0.5, 1.0, 2.0][rng.random_range(0..3)];
        let plan = ScanPlan::from_points(&positions.iter().map(|&(x, y)| Point::new(x, y)).collect::<Vec<_>>(), r);
        let (total, covered) = brute_force_cells(&exterior, &positions, r, step);
        if total == 0 {
            continue;
        }
        for exec in [Execution::Sequential, Execution::Parallel] {
            let c = coverage_fraction(&floor, &plan, step, exec).map_err(|e| e.to_string())?;
            ensure!((c.total_cells, c.covered_cells) == (total, covered), "fixture {checked}: {:?} vs ({total}, {covered})", c);
            ensure!(c.fraction == covered as f64 / total as f64, "fixture {checked}: fraction");
        }
        let mut expected = Vec::new();
        for a in 0..positions.len() {
            for b in a + 1..positions.len() {
                let (dx, dy) = (positions[a].0 - positions[b].0, positions[a].1 - positions[b].1);
                if (dx * dx + dy * dy).sqrt() < 2.0 * r {
                    expected.push((a as u32 + 1, b as u32 + 1));
                }
            }
        }
        ensure!(overlap_graph(&plan).edges == expected, "fixture {checked}: overlap edges");
        checked += 1;
    }
    let square = FloorOutline::rectangle(20.0, 20.0).unwrap();
    let c = coverage_fraction(&square, &ScanPlan::from_points(&[Point::new(10.0, 10.0)], 30.0), 1.0, Execution::Parallel)
        .map_err(|e| e.to_string())?;
    ensure!(c.fraction == 1.0, "20x20 centre case gave {}", c.fraction);
    Ok(())
}

fn day_by_day(start: NaiveDate, freq: u32, from: NaiveDate, to: NaiveDate) -> Vec<NaiveDate> {
    let mut out = Vec::new();
    let mut day = from;
    while day <= to {
        let since = (day - start).num_days();
        if since >= 0 && since % i64::from(freq) == 0 {
            out.push(day);
        }
        day = day.succ_opt().unwrap();
    }
    out
}

fn scheduler_oracle() -> Outcome {
    let leap = occurrences(d("2024-01-01"), 30, d("2024-01-01"), d("2024-03-31"));
    ensure!(leap == vec![d("2024-01-01"), d("2024-01-31"), d("2024-03-01"), d("2024-03-31")], "leap fixture gave {leap:?}");
    let mut rng = ChaCha8Rng::seed_from_u64(365);
    let base = d("2018-01-01");
    for case in 0..1000 {
        let start = base.checked_add_days(Days::new(rng.random_range(0..365 * 12))).unwrap();
        let from = base.checked_add_days(Days::new(rng.random_range(0..365 * 12))).unwrap();
        let to = from.checked_add_days(Days::new(rng.random_range(0..=3 * 365))).unwrap();
        let freq = rng.random_range(1..=365);
        let got = occurrences(start, freq, from, to);
        ensure!(got == day_by_day(start, freq, from, to), "case {case}: start {start} freq {freq} [{from}, {to}]");
    }
    Ok(())
}

fn state_machine_matrix() -> Outcome {
    let allowed: BTreeSet<(JobStatus, JobStatus)> = [
        (JobStatus::Open, JobStatus::Ongoing),
        (JobStatus::Ongoing, JobStatus::Completed),
        (JobStatus::Completed, JobStatus::Verified),
        (JobStatus::Ongoing, JobStatus::Open),
        (JobStatus::Completed, JobStatus::Ongoing),
    ]
    .into();
    let path = |s: JobStatus| -> &'static [JobStatus] {
        match s {
            JobStatus::Open => &[],
            JobStatus::Ongoing => &[JobStatus::Ongoing],
            JobStatus::Completed => &[JobStatus::Ongoing, JobStatus::Completed],
            JobStatus::Verified => &[JobStatus::Ongoing, JobStatus::Completed, JobStatus::Verified],
        }
    };
    let mut store = seeded();
    let at = ts("2024-03-01T00:00:00Z");
    let mut succeeded = BTreeSet::new();
    let mut pairs = 0;
    for from in JobStatus::ALL {
        for to in JobStatus::ALL {
            pairs += 1;
            let job = store.create_reactive_job(at, JobTarget::Equipment("EQ-00001".into()), "matrix", vec![], None).map_err(|e| e.to_string())?;
            for step in path(from) {
                store.transition(at, &job.job_id, *step, "setup", None).map_err(|e| e.to_string())?;
            }
            let seq = store.last_seq();
            match store.transition(at, &job.job_id, to, "tech", None) {
                Ok(_) => {
                    succeeded.insert((from, to));
                }
                Err(MaintenanceError::IllegalTransition { .. }) => ensure!(store.last_seq() == seq, "{from}->{to} appended an event"),
                Err(e) => return Err(format!("{from}->{to}: {e}")),
            }
        }
    }
    ensure!(pairs == 16, "{pairs} pairs");
    ensure!(succeeded == allowed, "succeeded {succeeded:?}");
    Ok(())
}

fn run_oracle(values: &[f64], low: f64, high: f64, raise: usize, clear: usize) -> (Vec<usize>, Vec<usize>) {
    let out: Vec<bool> = values.iter().map(|v| *v < low || *v > high).collect();
    let (mut raises, mut clears, mut active, mut s) = (Vec::new(), Vec::new(), false, 0);
    while s < out.len() {
        let mut e = s;
        while e < out.len() && out[e] == out[s] {
            e += 1;
        }
        if out[s] && !active && e - s >= raise {
            raises.push(s + raise - 1);
            active = true;
        } else if !out[s] && active && e - s >= clear {
            clears.push(s + clear - 1);
            active = false;
        }
        s = e;
    }
    (raises, clears)
}

fn alarm_debounce() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(68);
    let levels = [60.0, 67.9, 68.0, 72.0, 76.0, 76.1, 90.0];
    for case in 0..1000 {
        let values: Vec<f64> = (0..rng.random_range(0..120)).map(|_| levels[rng.random_range(0..levels.len())]).collect();
        let (raise, clear) = (rng.random_range(1..5u32), rng.random_range(1..5u32));
        let rule = AlarmRule { sensor_id: "S".into(), low: 68.0, high: 76.0, raise_debounce: raise, clear_debounce: clear };
        let mut state = RuleState::new(rule);
        let (mut raises, mut clears) = (Vec::new(), Vec::new());
        for (k, v) in values.iter().enumerate() {
            let reading = SensorReading {
                sensor_id: "S".into(),
                at: Timestamp::from_epoch_seconds(300 * k as i64),
                value: *v,
                source: ReadingSource::Simulated,
            };
            let (t, next) = evaluate(&state, &reading).map_err(|e| e.to_string())?;
            match t {
                Some(AlarmTransition::Raise { .. }) => raises.push(k),
                Some(AlarmTransition::Clear { .. }) => clears.push(k),
                None => {}
            }
            state = next;
        }
        let expected = run_oracle(&values, 68.0, 76.0, raise as usize, clear as usize);
        ensure!((raises.clone(), clears.clone()) == expected, "case {case}: {:?} vs {expected:?}", (raises, clears));
    }
    let mut store = seeded();
    store.run_simulation(7, SimulationWindow::hours(ts("2024-03-01T00:00:00Z"), 24.0), Execution::Parallel, |_| {}).map_err(|e| e.to_string())?;
    let mut active: BTreeMap<String, String> = BTreeMap::new();
    let mut raised = 0;
    for e in store.events() {
        match &e.body {
            EventBody::AlarmRaised(a) => {
                ensure!(!active.contains_key(&a.sensor_id), "second active alarm on {} at seq {}", a.sensor_id, e.seq);
                active.insert(a.sensor_id.clone(), a.alarm_id.clone());
                raised += 1;
            }
            EventBody::AlarmCleared { alarm_id, .. } => {
                let sensor = store.graph().alarms[alarm_id].sensor_id.clone();
                ensure!(active.remove(&sensor).as_ref() == Some(alarm_id), "clear of inactive alarm {alarm_id}");
            }
            _ => {}
        }
    }
    ensure!(raised > 0, "simulated day raised no alarms; the at-most-one check was vacuous");
    Ok(())
}

fn twinctl(log: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_twinctl"))
        .arg("--log")
        .arg(log)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("twinctl {args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn simulation_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut segments = Vec::new();
    for name in ["a.jsonl", "b.jsonl"] {
        let log = dir.path().join(name);
        twinctl(&log, &["seed"])?;
        let seeded_len = std::fs::read(&log).map_err(|e| e.to_string())?.len();
        let summary: Value = serde_json::from_str(&twinctl(&log, &["simulate", "--seed", "42", "--hours", "2"])?).map_err(|e| e.to_string())?;
        let bytes = std::fs::read(&log).map_err(|e| e.to_string())?;
        segments.push((bytes[seeded_len..].to_vec(), summary));
    }
    ensure!(!segments[0].0.is_empty(), "simulation appended nothing");
    ensure!(segments[0].0 == segments[1].0, "event-log segments differ");
    let store = TwinStore::open(dir.path().join("a.jsonl")).map_err(|e| e.to_string())?;
    let window = SimulationWindow::hours(ts("2024-03-01T00:00:00Z"), 2.0);
    let mut expected = 0;
    for spec in store.graph().sensors.values() {
        ensure!((60..=300).contains(&spec.interval_s), "{} interval {}", spec.sensor_id, spec.interval_s);
        let n = expected_reading_count(spec.interval_s, window);
        ensure!(n == 7200 / u64::from(spec.interval_s) + 1, "closed form for {}", spec.sensor_id);
        let got = store.graph().readings.get(&spec.sensor_id).map_or(0, |r| r.len()) as u64;
        ensure!(got == n, "{}: {got} readings, expected {n}", spec.sensor_id);
        expected += n;
    }
    ensure!(segments[0].1["readings"] == expected, "summary readings {} vs {expected}", segments[0].1["readings"]);
    Ok(())
}

async fn call(router: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            HttpBody::from(v.to_string())
        }
        None => HttpBody::empty(),
    };
    let resp = router.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn service(log: &Path) -> Result<(SharedApp, Router), String> {
    let config = ServiceConfig { event_log_path: log.to_path_buf(), seed_data_dir: Some(builtin_seed_dir()), ..Default::default() };
    let app = open_app(&config).map_err(|e| e.to_string())?.with_clock(|| ts("2024-03-02T08:00:00Z")).shared();
    let router = build_router(app.clone(), None).map_err(|e| e.to_string())?;
    Ok((app, router))
}

const GET_ENDPOINTS: &[&str] = &[
    "/health",
    "/spaces",
    "/spaces/Room%20101",
    "/equipment",
    "/equipment?discipline=electrical",
    "/equipment/EQ-00042",
    "/equipment/EQ-00042/documents",
    "/equipment/EQ-00042/readings",
    "/sensors",
    "/alarms",
    "/alarms?active=true",
    "/policies",
    "/jobs",
    "/jobs?status=ongoing",
    "/jobs/JOB-00001",
    "/jobs/JOB-00001/comments",
    "/reports",
    "/reports/maintenance",
    "/reports/health",
    "/reports/staff",
    "/dashboards",
    "/dashboards/ahu",
    "/dashboards/drinking_fountain",
    "/dashboards/electrical_panel",
    "/dashboards/elevator",
    "/dashboards/generator",
    "/dashboards/lighting",
    "/dashboards/temperature",
    "/dashboards/transformer",
    "/dashboards/water_closet",
    "/dashboards/water_pressure",
];

async fn replay_restart() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let log = dir.path().join("events.jsonl");
    let (app, router) = service(&log)?;
    let post = |uri: &'static str, body: Value| {
        let router = router.clone();
        async move { call(&router, Method::POST, uri, Some(body)).await }
    };
    let (s, _) = post("/simulate", serde_json::json!({"seed": 42, "hours": 2})).await;
    ensure!(s == StatusCode::OK, "simulate: {s}");
    let (s, _) = post("/jobs/generate", serde_json::json!({"from": "2024-01-01", "to": "2024-03-31"})).await;
    ensure!(s == StatusCode::OK, "generate: {s}");
    let (s, _) = post("/jobs/JOB-00001/transition", serde_json::json!({"to": "ongoing", "actor": "tech-01"})).await;
    ensure!(s == StatusCode::OK, "transition: {s}");
    let (s, _) = post("/jobs/JOB-00001/comments", serde_json::json!({"actor": "tech-01", "text": "fuel topped up"})).await;
    ensure!(s == StatusCode::CREATED, "comment: {s}");
    let (s, _) = post("/equipment/EQ-00042/documents", serde_json::json!({"kind": "cut_sheet", "title": "Sensor cut sheet"})).await;
    ensure!(s == StatusCode::CREATED, "document: {s}");
    let mut before = Vec::new();
    for uri in GET_ENDPOINTS {
        let (status, body) = call(&router, Method::GET, uri, None).await;
        ensure!(status == StatusCode::OK, "GET {uri} before restart: {status} {body}");
        before.push(body);
    }
    app.flush().map_err(|e| e.to_string())?;
    drop((router, app));

    let (_app, router) = service(&log)?;
    for (uri, expected) in GET_ENDPOINTS.iter().zip(&before) {
        let (status, body) = call(&router, Method::GET, uri, None).await;
        ensure!(status == StatusCode::OK, "GET {uri} after restart: {status}");
        ensure!(&body == expected, "GET {uri} differs after restart");
    }
    Ok(())
}

async fn dashboard_coverage() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (app, router) = service(&dir.path().join("events.jsonl"))?;
    let (s, _) = call(&router, Method::POST, "/simulate", Some(serde_json::json!({"seed": 42, "hours": 1}))).await;
    ensure!(s == StatusCode::OK, "simulate: {s}");
    let registry = MetricRegistry::builtin();
    // (sensor kind, equipment type, at, value, sensor id) for every committed reading.
    let raw: Vec<(String, String, Timestamp, f64, String)> = app.read(|s| {
        let g = s.graph();
        s.events()
            .iter()
            .filter_map(|e| match &e.body {
                EventBody::ReadingIngested(r) => {
                    let spec = &g.sensors[&r.sensor_id];
                    Some((spec.kind.to_string(), g.equipment[&spec.bound_equipment].omniclass_type.number(), r.at, r.value, r.sensor_id.clone()))
                }
                _ => None,
            })
            .collect()
    });
    let mut nonempty = 0;
    for (system, def) in &registry.systems {
        let uri = format!("/dashboards/{system}?from=2024-03-01T00:00:00Z&to=2024-03-01T01:05:00Z&bucket=900");
        let (status, body) = call(&router, Method::GET, &uri, None).await;
        ensure!(status == StatusCode::OK, "{uri}: {status} {body}");
        let dash: Value = serde_json::from_str(&body).map_err(|e| e.to_string())?;
        let series = dash["series"].as_array().ok_or("no series")?;
        ensure!(series.len() == def.metrics.len(), "{system}: {} series", series.len());
        for (metric, s) in def.metrics.iter().zip(series) {
            let mut feeding: Vec<&(String, String, Timestamp, f64, String)> = raw
                .iter()
                .filter(|r| r.0 == metric.sensor_kind.to_string() && metric.equipment_types.iter().any(|p| r.1.starts_with(p.as_str())))
                .collect();
            feeding.sort_by(|a, b| (a.2, &a.4).cmp(&(b.2, &b.4)));
            let points = s["points"].as_array().ok_or("no points")?;
            let counted: u64 = points.iter().map(|p| p["sample_count"].as_u64().unwrap()).sum();
            ensure!(counted == feeding.len() as u64, "{system}/{}: {counted} samples vs {} raw", metric.metric, feeding.len());
            if counted > 0 {
                nonempty += 1;
            }
            for p in points {
                let start: Timestamp = serde_json::from_value(p["bucket_start"].clone()).map_err(|e| e.to_string())?;
                let values: Vec<f64> = feeding.iter().filter(|r| r.2 >= start && r.2 < start.plus_seconds(900)).map(|r| r.3).collect();
                if values.is_empty() {
                    ensure!(p["value"].is_null(), "{system}/{}: empty bucket has a value", metric.metric);
                    continue;
                }
                let sum: f64 = values.iter().sum();
                ensure!(p["sum"].as_f64() == Some(sum), "{system}/{}: bucket sum {} vs {sum}", metric.metric, p["sum"]);
                if metric.aggregation == twin_core::reporting::Aggregation::Mean {
                    let mean = sum / values.len() as f64;
                    ensure!(p["value"].as_f64() == Some(mean), "{system}/{}: bucket mean {} vs {mean}", metric.metric, p["value"]);
                }
            }
        }
    }
    ensure!(nonempty > 0, "no dashboard metric had data");
    Ok(())
}

fn reporting_folds() -> Outcome {
    let mut store = seeded();
    let base = ts("2024-03-01T00:00:00Z");
    let actors = ["tech-01", "tech-02", "cust-01", "cust-02"];
    let paths: [&[JobStatus]; 5] = [
        &[],
        &[JobStatus::Ongoing],
        &[JobStatus::Ongoing, JobStatus::Completed],
        &[JobStatus::Ongoing, JobStatus::Completed, JobStatus::Verified],
        &[JobStatus::Ongoing, JobStatus::Open, JobStatus::Ongoing, JobStatus::Completed],
    ];
    for k in 0..20i64 {
        let target = if k % 3 == 0 { JobTarget::Space("Restroom A".into()) } else { JobTarget::Equipment(format!("EQ-{:05}", 1 + k * 7)) };
        let created = base.plus_seconds(k * 1800);
        let job = store.create_reactive_job(created, target, &format!("job {k}"), vec![], None).map_err(|e| e.to_string())?;
        for (step, to) in paths[(k % 5) as usize].iter().enumerate() {
            store.transition(created.plus_seconds(3600 * (step as i64 + 1)), &job.job_id, *to, actors[(k as usize + step) % 4], None).map_err(|e| e.to_string())?;
        }
        if k % 2 == 0 {
            store.add_comment(created.plus_seconds(600), &job.job_id, actors[(k as usize + 1) % 4], "note").map_err(|e| e.to_string())?;
        }
        for (v, minute) in [(70.0, 0), (80.0, 5)] {
            if k == 4 {
                let body = format!(r#"{{"at":"{}","value":{v},"unit":"F"}}"#, created.plus_seconds(60 * minute).to_rfc3339());
                store.ingest("pgb", "twin/pgb/EQ-00042/temperature", body.as_bytes()).map_err(|e| e.to_string())?;
            }
        }
    }
    // Independent folds over the log.
    struct Fold {
        created: Timestamp,
        target: JobTarget,
        changes: Vec<(Timestamp, JobStatus, JobStatus, String)>,
        comments: Vec<(Timestamp, String)>,
    }
    let mut jobs: BTreeMap<String, Fold> = BTreeMap::new();
    let mut readings: BTreeMap<String, Vec<(Timestamp, f64)>> = BTreeMap::new();
    for e in store.events() {
        match &e.body {
            EventBody::JobCreated(j) => {
                jobs.insert(j.job_id.clone(), Fold { created: e.at, target: j.target.clone(), changes: vec![], comments: vec![] });
            }
            EventBody::JobTransitioned { job_id, from, to, actor, .. } => jobs.get_mut(job_id).unwrap().changes.push((e.at, *from, *to, actor.clone())),
            EventBody::CommentAdded { job_id, actor, .. } => jobs.get_mut(job_id).unwrap().comments.push((e.at, actor.clone())),
            EventBody::ReadingIngested(r) => readings.entry(r.sensor_id.clone()).or_default().push((r.at, r.value)),
            _ => {}
        }
    }
    ensure!(jobs.len() == 20, "{} jobs", jobs.len());
    let status_at = |j: &Fold, t: Timestamp| j.changes.iter().rfind(|c| c.0 < t).map_or(JobStatus::Open, |c| c.2);
    for (from, to) in [(0, 86_400), (3600, 7200), (9000, 30_000), (-3600, 1), (40_000, 90_000)] {
        let w = ReportWindow::span(base.plus_seconds(from), base.plus_seconds(to)).map_err(|e| e.to_string())?;
        let inside = |t: Timestamp| w.from <= t && t < w.to;
        let m = maintenance_summary(store.graph(), &w);
        let created: Vec<&Fold> = jobs.values().filter(|j| inside(j.created)).collect();
        ensure!(m.jobs == created.len() as u64, "[{from},{to}) jobs");
        for st in JobStatus::ALL {
            let n = created.iter().filter(|j| status_at(j, w.to) == st).count() as u64;
            ensure!(m.by_status[&st] == n, "[{from},{to}) {st}: {} vs {n}", m.by_status[&st]);
        }
        let spaces = created.iter().filter(|j| matches!(j.target, JobTarget::Space(_))).count() as u64;
        ensure!(m.by_discipline["space"] == spaces, "[{from},{to}) space jobs");
        let transitions: usize = jobs.values().map(|j| j.changes.iter().filter(|c| inside(c.0)).count()).sum();
        let comments: usize = jobs.values().map(|j| j.comments.iter().filter(|c| inside(c.0)).count()).sum();
        ensure!((m.transitions, m.comments) == (transitions as u64, comments as u64), "[{from},{to}) transitions/comments");

        let mut staff: BTreeMap<String, (u64, u64, u64)> = BTreeMap::new();
        for j in jobs.values() {
            for (at, f, t, actor) in j.changes.iter().filter(|c| inside(c.0)) {
                let _ = at;
                let e = staff.entry(actor.clone()).or_default();
                e.0 += 1;
                e.2 += u64::from(*f == JobStatus::Ongoing && *t == JobStatus::Completed);
            }
            for (_, actor) in j.comments.iter().filter(|c| inside(c.0)) {
                staff.entry(actor.clone()).or_default().1 += 1;
            }
        }
        let got: BTreeMap<String, (u64, u64, u64)> = staff_activity(store.graph(), &w)
            .into_iter()
            .map(|(k, a)| (k, (a.transitions_performed, a.comments_added, a.jobs_completed)))
            .collect();
        ensure!(got == staff, "[{from},{to}) staff activity");

        for h in equipment_health(store.graph(), &w) {
            let open = jobs
                .values()
                .filter(|j| j.created < w.to && j.target == JobTarget::Equipment(h.equipment_id.clone()))
                .filter(|j| matches!(status_at(j, w.to), JobStatus::Open | JobStatus::Ongoing))
                .count() as u64;
            ensure!(h.open_job_count == open, "[{from},{to}) {} open jobs", h.equipment_id);
            let g = store.graph();
            let (mut n, mut out) = (0u64, 0u64);
            for spec in g.sensors_of(&h.equipment_id) {
                let rule = &g.rule_states[&spec.sensor_id].rule;
                for (at, v) in readings.get(&spec.sensor_id).into_iter().flatten() {
                    if inside(*at) {
                        n += 1;
                        out += u64::from(*v < rule.low || *v > rule.high);
                    }
                }
            }
            ensure!((h.readings, h.readings_out_of_range) == (n, out), "[{from},{to}) {} readings", h.equipment_id);
        }
    }
    Ok(())
}

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    });
    match outcome {
        Ok(()) => {
            println!("PASS {name}");
            true
        }
        Err(reason) => {
            println!("FAIL {name}: {reason}");
            false
        }
    }
}

fn main() {
    let runtime = tokio::runtime::Runtime::new().unwrap();
    let results = [
        run("seed inventory fidelity", seed_inventory_fidelity),
        run("omniclass round-trip", omniclass_round_trip),
        run("scan-plan oracle equivalence", scan_plan_oracle),
        run("scheduler oracle equivalence", scheduler_oracle),
        run("state-machine matrix", state_machine_matrix),
        run("alarm debounce", alarm_debounce),
        run("simulation determinism", simulation_determinism),
        run("replay/restart", || runtime.block_on(replay_restart())),
        run("dashboard coverage", || runtime.block_on(dashboard_coverage())),
        run("reporting folds", reporting_folds),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
