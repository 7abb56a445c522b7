use chrono::{Days, NaiveDate};
use proptest::prelude::*;
use twin_core::graph::TwinStore;
use twin_core::maintenance::{occurrences, JobOrigin, JobStatus, MaintenanceError, MaintenancePolicy, PolicyTarget};
use twin_core::seed::{builtin_seed_dir, load_seed};
use twin_core::Timestamp;

fn d(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

/// Walks every day of the horizon and keeps those a whole number of periods
/// after the start.
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

#[test]
fn leap_year_fixture() {
    let got = occurrences(d("2024-01-01"), 30, d("2024-01-01"), d("2024-03-31"));
    assert_eq!(got, vec![d("2024-01-01"), d("2024-01-31"), d("2024-03-01"), d("2024-03-31")]);
    assert_eq!(got, day_by_day(d("2024-01-01"), 30, d("2024-01-01"), d("2024-03-31")));
}

#[test]
fn horizon_before_start_is_empty() {
    assert!(occurrences(d("2024-06-01"), 7, d("2024-01-01"), d("2024-05-31")).is_empty());
}

fn date() -> impl Strategy<Value = NaiveDate> {
    (0u64..(365 * 12)).prop_map(|n| d("2018-01-01").checked_add_days(Days::new(n)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn occurrences_match_day_scan(start in date(), freq in 1u32..=365, from in date(), len in 0u64..=(3 * 366)) {
        let to = from.checked_add_days(Days::new(len)).unwrap();
        prop_assert_eq!(occurrences(start, freq, from, to), day_by_day(start, freq, from, to));
    }
}

fn seeded() -> TwinStore {
    let mut store = TwinStore::in_memory();
    load_seed(&mut store, &builtin_seed_dir()).unwrap();
    store
}

fn t() -> Timestamp {
    "2024-01-01T00:00:00Z".parse().unwrap()
}

#[test]
fn generator_policy_jobs() {
    let mut store = seeded();
    let jobs = store.generate_jobs(t(), "PM-001", d("2024-01-01"), d("2024-03-31")).unwrap();
    let dates: Vec<NaiveDate> = jobs.iter().filter_map(|j| j.due_date).collect();
    assert_eq!(dates, vec![d("2024-01-01"), d("2024-01-31"), d("2024-03-01"), d("2024-03-31")]);
    assert!(jobs.iter().all(|j| j.status == JobStatus::Open && j.description == "check fuel; run load test"));
}

#[test]
fn one_job_per_ahu_per_occurrence() {
    let mut store = seeded();
    let jobs = store.generate_jobs(t(), "PM-002", d("2024-01-01"), d("2024-01-01")).unwrap();
    assert_eq!(jobs.len(), 3);
    let targets: std::collections::BTreeSet<&str> = jobs.iter().map(|j| j.target.id()).collect();
    assert_eq!(targets.len(), 3);
    assert!(jobs.iter().all(|j| matches!(&j.origin, JobOrigin::Preventive { policy_id, .. } if policy_id == "PM-002")));
}

#[test]
fn regeneration_over_overlap_adds_nothing() {
    let mut store = seeded();
    store.generate_jobs(t(), "PM-003", d("2024-01-01"), d("2024-01-10")).unwrap();
    let seq = store.last_seq();
    let again = store.generate_jobs(t(), "PM-003", d("2024-01-01"), d("2024-01-10")).unwrap();
    assert_eq!(store.last_seq(), seq);
    assert_eq!(again.len(), 10);
    let wider = store.generate_jobs(t(), "PM-003", d("2024-01-05"), d("2024-01-15")).unwrap();
    assert_eq!(wider.len(), 11);
    assert_eq!(store.graph().jobs.len(), 15);
}

#[test]
fn inverted_horizon() {
    let mut store = seeded();
    assert!(matches!(
        store.generate_jobs(t(), "PM-001", d("2024-02-01"), d("2024-01-01")),
        Err(MaintenanceError::InvertedHorizon { .. })
    ));
}

#[test]
fn policy_validation() {
    let mut store = seeded();
    let policy = |freq, target| MaintenancePolicy {
        policy_id: String::new(),
        target,
        tasks: vec!["inspect".into()],
        frequency_days: freq,
        start_date: d("2024-01-01"),
        resources: vec![],
    };
    assert!(matches!(store.create_policy(t(), policy(0, PolicyTarget::Room("Restroom A".into()))), Err(MaintenanceError::BadFrequency(0))));
    assert!(matches!(
        store.create_policy(t(), policy(7, PolicyTarget::Room("Room 999".into()))),
        Err(MaintenanceError::UnresolvedTarget(_))
    ));
    let id = store.create_policy(t(), policy(1, PolicyTarget::Room("Restroom A".into()))).unwrap();
    assert_eq!(store.graph().policies[&id].role(), twin_core::maintenance::AssigneeRole::Custodian);
}
