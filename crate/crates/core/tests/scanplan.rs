use std::collections::BTreeSet;

use proptest::prelude::*;
use serde::Deserialize;
use twin_core::par::Execution;
use twin_core::scanplan::{
    coverage_fraction, overlap_graph, validate_plan, FloorOutline, Point, Ring, ScanPlan, ScanPlanError, Target, TargetKind,
};

/// Classic crossing-number test over a vertex list.
fn pnpoly(v: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut c = false;
    let mut j = v.len() - 1;
    for i in 0..v.len() {
        let (xi, yi) = v[i];
        let (xj, yj) = v[j];
        if ((yi > y) != (yj > y)) && (x < (xj - xi) * (y - yi) / (yj - yi) + xi) {
            c = !c;
        }
        j = i;
    }
    c
}

/// Brute-force grid scan: every cell center of the bounding-box grid, tested
/// against every ring and every disk.
fn brute_force(exterior: &[(f64, f64)], holes: &[Vec<(f64, f64)>], positions: &[(f64, f64)], r: f64, step: f64) -> (u64, u64) {
    let min_x = exterior.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let min_y = exterior.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max_x = exterior.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let max_y = exterior.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let cols = ((max_x - min_x) / step).ceil() as usize;
    let rows = ((max_y - min_y) / step).ceil() as usize;
    let (mut total, mut covered) = (0, 0);
    for j in 0..rows {
        for i in 0..cols {
            let x = min_x + (i as f64 + 0.5) * step;
            let y = min_y + (j as f64 + 0.5) * step;
            if !pnpoly(exterior, x, y) || holes.iter().any(|h| pnpoly(h, x, y)) {
                continue;
            }
            total += 1;
            if positions.iter().any(|&(px, py)| (x - px) * (x - px) + (y - py) * (y - py) <= r * r) {
                covered += 1;
            }
        }
    }
    (total, covered)
}

fn ring(v: &[(f64, f64)]) -> Ring {
    Ring(v.iter().map(|&(x, y)| Point::new(x, y)).collect())
}

fn points(v: &[(f64, f64)]) -> Vec<Point> {
    v.iter().map(|&(x, y)| Point::new(x, y)).collect()
}

#[test]
fn small_square_fully_covered() {
    let floor = FloorOutline::rectangle(20.0, 20.0).unwrap();
    let plan = ScanPlan::from_points(&points(&[(10.0, 10.0)]), 30.0);
    let c = coverage_fraction(&floor, &plan, 1.0, Execution::Parallel).unwrap();
    assert_eq!(c.fraction, 1.0);
    assert_eq!(c.total_cells, 400);
}

#[test]
fn empty_plan_covers_nothing() {
    let floor = FloorOutline::rectangle(20.0, 20.0).unwrap();
    let plan = ScanPlan::from_points(&[], 30.0);
    let c = coverage_fraction(&floor, &plan, 1.0, Execution::Sequential).unwrap();
    assert_eq!(c.fraction, 0.0);
    assert_eq!(c.uncovered_cells, 400);
}

#[test]
fn two_scan_rectangle_matches_brute_force() {
    let floor = FloorOutline::rectangle(100.0, 40.0).unwrap();
    let pos = [(25.0, 20.0), (75.0, 20.0)];
    let plan = ScanPlan::from_points(&points(&pos), 30.0);
    let c = coverage_fraction(&floor, &plan, 1.0, Execution::Parallel).unwrap();
    let (total, covered) = brute_force(&[(0.0, 0.0), (100.0, 0.0), (100.0, 40.0), (0.0, 40.0)], &[], &pos, 30.0, 1.0);
    assert_eq!((c.total_cells, c.covered_cells), (total, covered));
    assert_eq!(c.fraction, covered as f64 / total as f64);
    let report = validate_plan(&floor, &plan, 0.99, 1.0, Execution::Parallel).unwrap();
    assert!(report.passed && report.sequence_valid && report.overlap_connected);
    assert!(report.coverage_fraction >= 0.99);
}

#[test]
fn sequence_gap_and_far_target() {
    let floor = FloorOutline::rectangle(100.0, 40.0).unwrap();
    let mut plan = ScanPlan::from_points(&points(&[(25.0, 20.0), (75.0, 20.0)]), 30.0);
    plan.positions[1].index = 3;
    plan.targets.push(Target { kind: TargetKind::Sphere, point: Point::new(500.0, 500.0), height: 5.0 });
    let report = validate_plan(&floor, &plan, 0.99, 1.0, Execution::Sequential).unwrap();
    assert!(!report.sequence_valid);
    assert!(!report.passed);
    assert!(report.warnings.iter().any(|w| w.starts_with("target out of range")));
}

#[test]
fn degenerate_and_bad_inputs() {
    let flat = FloorOutline::new(ring(&[(0.0, 0.0), (10.0, 0.0), (20.0, 0.0)]), vec![]);
    assert!(flat.is_err());
    let floor = FloorOutline::rectangle(10.0, 10.0).unwrap();
    let plan = ScanPlan::from_points(&[], 30.0);
    assert!(matches!(coverage_fraction(&floor, &plan, 0.0, Execution::Sequential), Err(ScanPlanError::BadGridStep(_))));
    // A sliver narrower than one cell has no cell centers inside.
    let sliver = FloorOutline::new(ring(&[(0.0, 0.0), (10.0, 0.0), (10.0, 0.2)]), vec![]).unwrap();
    assert!(matches!(coverage_fraction(&sliver, &plan, 1.0, Execution::Sequential), Err(ScanPlanError::DegenerateFloor)));
}

/// Star-shaped polygon around `(cx, cy)`: simple by construction.
fn star() -> impl Strategy<Value = Vec<(f64, f64)>> {
    (3usize..12, 20.0f64..80.0, 20.0f64..80.0).prop_flat_map(|(n, cx, cy)| {
        (prop::collection::vec((0.0f64..1.0, 8.0f64..60.0), n), Just((cx, cy))).prop_map(|(raw, (cx, cy))| {
            let mut angles: Vec<(f64, f64)> = raw;
            angles.sort_by(|a, b| a.0.total_cmp(&b.0));
            angles
                .into_iter()
                .map(|(t, r)| {
                    let a = t * std::f64::consts::TAU;
                    (((cx + r * a.cos()) * 4.0).round() / 4.0, ((cy + r * a.sin()) * 4.0).round() / 4.0)
                })
                .collect()
        })
    })
}

fn case() -> impl Strategy<Value = (Vec<(f64, f64)>, bool, Vec<(f64, f64)>, f64, f64)> {
    (
        star(),
        any::<bool>(),
        prop::collection::vec((0.0f64..140.0, 0.0f64..140.0), 0..6),
        prop_oneof![Just(10.0), Just(20.0), Just(30.0)],
        prop_oneof![Just(0.5), Just(0.75), Just(1.0), Just(1.5), Just(2.0)],
    )
}

fn hole_for(exterior: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let n = exterior.len() as f64;
    let cx = exterior.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = exterior.iter().map(|p| p.1).sum::<f64>() / n;
    let h = 1.5;
    vec![(cx - h, cy - h), (cx + h, cy - h), (cx + h, cy + h), (cx - h, cy + h)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn coverage_matches_brute_force((exterior, with_hole, positions, r, step) in case()) {
        let holes: Vec<Vec<(f64, f64)>> = if with_hole { vec![hole_for(&exterior)] } else { vec![] };
        let floor = FloorOutline::new(ring(&exterior), holes.iter().map(|h| ring(h)).collect());
        prop_assume!(floor.is_ok());
        let floor = floor.unwrap();
        let (total, covered) = brute_force(&exterior, &holes, &positions, r, step);
        prop_assume!(total > 0);
        let plan = ScanPlan::from_points(&points(&positions), r);
        for exec in [Execution::Sequential, Execution::Parallel] {
            let c = coverage_fraction(&floor, &plan, step, exec).unwrap();
            prop_assert_eq!((c.total_cells, c.covered_cells), (total, covered));
            prop_assert_eq!(c.fraction, covered as f64 / total as f64);
            prop_assert_eq!(c.uncovered_cells, total - covered);
        }
    }

    #[test]
    fn adding_a_position_never_reduces_coverage((exterior, _h, positions, r, step) in case(), extra in (0.0f64..140.0, 0.0f64..140.0)) {
        let floor = FloorOutline::new(ring(&exterior), vec![]);
        prop_assume!(floor.is_ok());
        let floor = floor.unwrap();
        let before = coverage_fraction(&floor, &ScanPlan::from_points(&points(&positions), r), step, Execution::Parallel);
        prop_assume!(before.is_ok());
        let mut more = positions.clone();
        more.push(extra);
        let after = coverage_fraction(&floor, &ScanPlan::from_points(&points(&more), r), step, Execution::Parallel).unwrap();
        let before = before.unwrap();
        prop_assert!(after.covered_cells >= before.covered_cells);
        prop_assert!(after.fraction >= before.fraction);
    }

    #[test]
    fn overlap_matches_pairwise_distances(
        raw in prop::collection::vec((0i32..200, 0i32..200), 0..12),
        r in prop_oneof![Just(10.0), Just(25.0), Just(30.0)],
    ) {
        let pts: Vec<(f64, f64)> = raw.iter().map(|&(x, y)| (f64::from(x), f64::from(y))).collect();
        let plan = ScanPlan::from_points(&points(&pts), r);
        let g = overlap_graph(&plan);
        let mut expected = BTreeSet::new();
        for a in 0..pts.len() {
            for b in 0..pts.len() {
                let (dx, dy) = (pts[a].0 - pts[b].0, pts[a].1 - pts[b].1);
                if a != b && dx * dx + dy * dy < 4.0 * r * r {
                    expected.insert(((a + 1).min(b + 1) as u32, (a + 1).max(b + 1) as u32));
                }
            }
        }
        let got: BTreeSet<(u32, u32)> = g.edges.iter().copied().collect();
        prop_assert_eq!(got.len(), g.edges.len());
        prop_assert_eq!(&got, &expected);
        // Connectivity by flood fill.
        let mut seen = vec![false; pts.len()];
        let mut stack = vec![0usize];
        while let Some(k) = stack.pop() {
            if pts.is_empty() || seen[k] { continue; }
            seen[k] = true;
            for &(a, b) in &expected {
                let (a, b) = (a as usize - 1, b as usize - 1);
                if a == k && !seen[b] { stack.push(b); }
                if b == k && !seen[a] { stack.push(a); }
            }
        }
        prop_assert_eq!(g.connected, seen.iter().all(|s| *s));
    }
}

#[test]
fn overlap_examples() {
    let g = |pts: &[(f64, f64)]| overlap_graph(&ScanPlan::from_points(&points(pts), 30.0));
    assert_eq!(g(&[(0.0, 0.0), (50.0, 0.0)]).edges, vec![(1, 2)]);
    assert!(g(&[(0.0, 0.0), (70.0, 0.0)]).edges.is_empty());
    assert!(!g(&[(0.0, 0.0), (70.0, 0.0)]).connected);
    assert!(g(&[(0.0, 0.0), (60.0, 0.0)]).edges.is_empty(), "tangent disks do not overlap");
    let single = g(&[(5.0, 5.0)]);
    assert!(single.edges.is_empty() && single.connected);
}

#[derive(Deserialize)]
struct RefinementCase {
    name: String,
    exterior: Vec<(f64, f64)>,
    positions: Vec<(f64, f64)>,
    range_radius: f64,
    grid_step: f64,
    tolerance: f64,
}

#[derive(Deserialize)]
struct RefinementFixture {
    cases: Vec<RefinementCase>,
}

#[test]
fn grid_refinement_stays_within_recorded_tolerance() {
    let text = include_str!("../fixtures/scan_refinement.json");
    let fixture: RefinementFixture = serde_json::from_str(text).unwrap();
    assert!(!fixture.cases.is_empty());
    for c in fixture.cases {
        let floor = FloorOutline::new(ring(&c.exterior), vec![]).unwrap();
        let plan = ScanPlan::from_points(&points(&c.positions), c.range_radius);
        let coarse = coverage_fraction(&floor, &plan, c.grid_step, Execution::Parallel).unwrap().fraction;
        let fine = coverage_fraction(&floor, &plan, c.grid_step / 2.0, Execution::Parallel).unwrap().fraction;
        let delta = (coarse - fine).abs();
        let bound = floor.perimeter() * c.grid_step / floor.area();
        assert!(c.tolerance <= bound, "{}: recorded tolerance {} exceeds perimeter bound {bound}", c.name, c.tolerance);
        assert!(delta <= c.tolerance, "{}: |{coarse} - {fine}| = {delta} > {}", c.name, c.tolerance);
    }
}
