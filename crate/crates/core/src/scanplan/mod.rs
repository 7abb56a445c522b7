//! Laser-scan plan validation: range-disk coverage of a floor, overlap
//! between scan positions for registration, and scan sequencing.
//!
//! Coverage is sampled on an axis-aligned grid anchored at the floor's
//! bounding-box minimum. A cell counts when its center is inside the exterior
//! and outside every hole; it is covered when the center lies within
//! `range_radius` of at least one position. Line of sight is not modeled.

mod geometry;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::par::{self, Execution};

pub use geometry::{Point, Ring};

pub const DEFAULT_RANGE_RADIUS: f64 = 30.0;
pub const DEFAULT_GRID_STEP: f64 = 1.0;
pub const DEFAULT_MIN_COVERAGE: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScanPlanError {
    #[error("invalid floor outline: {0}")]
    InvalidFloor(String),
    #[error("floor has no area at this grid step")]
    DegenerateFloor,
    #[error("grid step must be positive and finite, got {0}")]
    BadGridStep(f64),
    #[error("minimum coverage must be in (0, 1], got {0}")]
    BadMinCoverage(f64),
    #[error("invalid scan plan: {0}")]
    InvalidPlan(String),
    #[error("cannot read {path}: {message}")]
    Unreadable { path: String, message: String },
}

/// Floor outline in feet: a simple exterior ring with optional holes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloorOutline {
    exterior: Ring,
    holes: Vec<Ring>,
}

impl FloorOutline {
    pub fn new(exterior: Ring, holes: Vec<Ring>) -> Result<Self, ScanPlanError> {
        let invalid = |m: &str| Err(ScanPlanError::InvalidFloor(m.to_string()));
        if exterior.vertices().iter().chain(holes.iter().flat_map(|h| h.vertices())).any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return invalid("coordinates must be finite");
        }
        if !exterior.is_simple() {
            return invalid("exterior ring is not a simple polygon");
        }
        for (i, hole) in holes.iter().enumerate() {
            if !hole.is_simple() {
                return invalid(&format!("hole {i} is not a simple polygon"));
            }
            if hole.crosses(&exterior) || !hole.vertices().iter().all(|p| exterior.contains(*p)) {
                return invalid(&format!("hole {i} is not strictly inside the exterior"));
            }
            for (j, other) in holes.iter().enumerate().skip(i + 1) {
                if hole.crosses(other) || other.vertices().iter().any(|p| hole.contains(*p)) || hole.vertices().iter().any(|p| other.contains(*p)) {
                    return invalid(&format!("holes {i} and {j} overlap"));
                }
            }
        }
        let floor = Self { exterior, holes };
        if floor.area() <= 0.0 {
            return Err(ScanPlanError::DegenerateFloor);
        }
        Ok(floor)
    }

    pub fn rectangle(width: f64, height: f64) -> Result<Self, ScanPlanError> {
        Self::new(
            Ring(vec![Point::new(0.0, 0.0), Point::new(width, 0.0), Point::new(width, height), Point::new(0.0, height)]),
            Vec::new(),
        )
    }

    pub fn exterior(&self) -> &Ring {
        &self.exterior
    }

    pub fn holes(&self) -> &[Ring] {
        &self.holes
    }

    pub fn area(&self) -> f64 {
        self.exterior.area() - self.holes.iter().map(Ring::area).sum::<f64>()
    }

    pub fn perimeter(&self) -> f64 {
        self.exterior.perimeter() + self.holes.iter().map(Ring::perimeter).sum::<f64>()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.exterior.contains(p) && !self.holes.iter().any(|h| h.contains(p))
    }

    /// Reads a GeoJSON `Polygon`, or the first polygon of a `Feature` or
    /// `FeatureCollection`. Coordinates are taken as feet.
    pub fn from_geojson(text: &str) -> Result<Self, ScanPlanError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ScanPlanError::InvalidFloor(format!("not JSON: {e}")))?;
        let geometry = find_polygon(&value).ok_or_else(|| ScanPlanError::InvalidFloor("no Polygon geometry found".into()))?;
        let rings: Vec<Vec<[f64; 2]>> = serde_json::from_value(geometry["coordinates"].clone())
            .map_err(|e| ScanPlanError::InvalidFloor(format!("bad coordinates: {e}")))?;
        let mut rings = rings
            .into_iter()
            .map(|r| Ring::from_open_or_closed(r.into_iter().map(Point::from).collect()));
        let exterior = rings.next().ok_or_else(|| ScanPlanError::InvalidFloor("polygon has no rings".into()))?;
        Self::new(exterior, rings.collect())
    }

    pub fn from_geojson_file(path: &Path) -> Result<Self, ScanPlanError> {
        Self::from_geojson(&read(path)?)
    }

    pub fn to_geojson(&self) -> serde_json::Value {
        let ring = |r: &Ring| {
            let mut pts: Vec<[f64; 2]> = r.vertices().iter().map(|&p| p.into()).collect();
            if let Some(&first) = pts.first() {
                pts.push(first);
            }
            pts
        };
        let coords: Vec<Vec<[f64; 2]>> = std::iter::once(&self.exterior).chain(&self.holes).map(ring).collect();
        serde_json::json!({ "type": "Polygon", "coordinates": coords })
    }
}

fn find_polygon(v: &serde_json::Value) -> Option<&serde_json::Value> {
    match v.get("type")?.as_str()? {
        "Polygon" => Some(v),
        "Feature" => find_polygon(v.get("geometry")?),
        "FeatureCollection" => v.get("features")?.as_array()?.iter().find_map(find_polygon),
        _ => None,
    }
}

fn read(path: &Path) -> Result<String, ScanPlanError> {
    std::fs::read_to_string(path)
        .map_err(|e| ScanPlanError::Unreadable { path: path.display().to_string(), message: e.to_string() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPosition {
    pub index: u32,
    pub point: Point,
    #[serde(default)]
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Checkerboard,
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub kind: TargetKind,
    pub point: Point,
    #[serde(default)]
    pub height: f64,
}

fn default_radius() -> f64 {
    DEFAULT_RANGE_RADIUS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPlan {
    pub positions: Vec<ScanPosition>,
    #[serde(default)]
    pub targets: Vec<Target>,
    #[serde(default = "default_radius")]
    pub range_radius: f64,
}

impl ScanPlan {
    /// Positions numbered 1..N in the given order.
    pub fn from_points(points: &[Point], range_radius: f64) -> Self {
        Self {
            positions: points
                .iter()
                .zip(1..)
                .map(|(&point, index)| ScanPosition { index, point, label: format!("S{index}") })
                .collect(),
            targets: Vec::new(),
            range_radius,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ScanPlanError> {
        let plan: Self = serde_json::from_str(text).map_err(|e| ScanPlanError::InvalidPlan(e.to_string()))?;
        plan.check_radius()?;
        Ok(plan)
    }

    pub fn from_json_file(path: &Path) -> Result<Self, ScanPlanError> {
        Self::from_json(&read(path)?)
    }

    fn check_radius(&self) -> Result<(), ScanPlanError> {
        if self.range_radius > 0.0 && self.range_radius.is_finite() {
            Ok(())
        } else {
            Err(ScanPlanError::InvalidPlan(format!("range_radius must be positive, got {}", self.range_radius)))
        }
    }

    pub fn scan_count(&self) -> usize {
        self.positions.len()
    }

    /// Indices are exactly 1..N in order.
    pub fn sequence_valid(&self) -> bool {
        !self.positions.is_empty() && self.positions.iter().zip(1..).all(|(p, expected)| p.index == expected)
    }

    fn within_range(&self, p: Point) -> bool {
        let r2 = self.range_radius * self.range_radius;
        self.positions.iter().any(|s| s.point.distance_squared(p) <= r2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coverage {
    pub fraction: f64,
    pub covered_cells: u64,
    pub total_cells: u64,
    pub uncovered_cells: u64,
}

/// Grid over the floor's bounding box: cell `(i, j)` has its center at
/// `(min_x + (i + 0.5)·step, min_y + (j + 0.5)·step)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub origin: Point,
    pub step: f64,
    pub columns: usize,
    pub rows: usize,
}

impl Grid {
    pub fn over(floor: &FloorOutline, step: f64) -> Result<Self, ScanPlanError> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(ScanPlanError::BadGridStep(step));
        }
        let (lo, hi) = floor.exterior.bounds().ok_or(ScanPlanError::DegenerateFloor)?;
        Ok(Self {
            origin: lo,
            step,
            columns: ((hi.x - lo.x) / step).ceil() as usize,
            rows: ((hi.y - lo.y) / step).ceil() as usize,
        })
    }

    pub fn center_x(&self, i: usize) -> f64 {
        self.origin.x + (i as f64 + 0.5) * self.step
    }

    pub fn center_y(&self, j: usize) -> f64 {
        self.origin.y + (j as f64 + 0.5) * self.step
    }
}

/// Sorted crossing abscissae of `ring` with the line at `y`.
fn crossings(ring: &Ring, y: f64) -> Vec<f64> {
    let mut xs: Vec<f64> = ring
        .edges()
        .filter(|(a, b)| (a.y > y) != (b.y > y))
        .map(|(a, b)| geometry::edge_crossing_x(a, b, y))
        .collect();
    xs.sort_by(f64::total_cmp);
    xs
}

/// Odd number of crossings strictly to the right of `x`.
fn inside_by_crossings(xs: &[f64], x: f64) -> bool {
    let right = xs.len() - xs.partition_point(|&c| c <= x);
    right % 2 == 1
}

/// Fraction of in-floor grid cells covered by at least one range disk.
/// Rows are evaluated independently (in parallel when enabled).
pub fn coverage_fraction(floor: &FloorOutline, plan: &ScanPlan, grid_step: f64, exec: Execution) -> Result<Coverage, ScanPlanError> {
    plan.check_radius()?;
    let grid = Grid::over(floor, grid_step)?;
    let r2 = plan.range_radius * plan.range_radius;
    let per_row = par::map_range(exec, grid.rows, |j| {
        let y = grid.center_y(j);
        let exterior = crossings(&floor.exterior, y);
        if exterior.is_empty() {
            return (0u64, 0u64);
        }
        let holes: Vec<Vec<f64>> = floor.holes.iter().map(|h| crossings(h, y)).collect();
        let near: Vec<Point> = plan
            .positions
            .iter()
            .map(|p| p.point)
            .filter(|p| {
                let dy = y - p.y;
                dy * dy <= r2
            })
            .collect();
        let (mut total, mut covered) = (0, 0);
        for i in 0..grid.columns {
            let x = grid.center_x(i);
            if !inside_by_crossings(&exterior, x) || holes.iter().any(|h| inside_by_crossings(h, x)) {
                continue;
            }
            total += 1;
            if near.iter().any(|p| {
                let dx = x - p.x;
                let dy = y - p.y;
                dx * dx + dy * dy <= r2
            }) {
                covered += 1;
            }
        }
        (total, covered)
    });
    let (total, covered) = per_row.into_iter().fold((0, 0), |(t, c), (rt, rc)| (t + rt, c + rc));
    if total == 0 {
        return Err(ScanPlanError::DegenerateFloor);
    }
    Ok(Coverage { fraction: covered as f64 / total as f64, covered_cells: covered, total_cells: total, uncovered_cells: total - covered })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OverlapGraph {
    /// Pairs of position indices `(i, j)` with `i < j`, sorted.
    pub edges: Vec<(u32, u32)>,
    pub connected: bool,
}

/// Two positions overlap when their open range disks intersect, i.e. their
/// distance is below twice the radius.
pub fn overlap_graph(plan: &ScanPlan) -> OverlapGraph {
    let n = plan.positions.len();
    let limit = 2.0 * plan.range_radius;
    let mut edges = Vec::new();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for a in 0..n {
        for b in (a + 1)..n {
            let (p, q) = (&plan.positions[a], &plan.positions[b]);
            if p.point.distance_squared(q.point).sqrt() < limit {
                edges.push((p.index.min(q.index), p.index.max(q.index)));
                let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
                parent[ra] = rb;
            }
        }
    }
    edges.sort_unstable();
    let connected = n <= 1 || (0..n).all(|i| root(&mut parent, i) == root(&mut parent, 0));
    OverlapGraph { edges, connected }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanReport {
    pub scan_count: usize,
    pub coverage_fraction: f64,
    pub covered_cell_count: u64,
    pub total_cell_count: u64,
    pub uncovered_cell_count: u64,
    pub min_coverage: f64,
    pub grid_step: f64,
    pub overlap_edges: Vec<(u32, u32)>,
    pub overlap_connected: bool,
    pub sequence_valid: bool,
    pub warnings: Vec<String>,
    pub passed: bool,
}

pub fn validate_plan(
    floor: &FloorOutline,
    plan: &ScanPlan,
    min_coverage: f64,
    grid_step: f64,
    exec: Execution,
) -> Result<PlanReport, ScanPlanError> {
    if !(min_coverage > 0.0 && min_coverage <= 1.0) {
        return Err(ScanPlanError::BadMinCoverage(min_coverage));
    }
    let coverage = coverage_fraction(floor, plan, grid_step, exec)?;
    let overlap = overlap_graph(plan);
    let sequence_valid = plan.sequence_valid();

    let mut warnings = Vec::new();
    if plan.positions.is_empty() {
        warnings.push("plan has no scan positions".to_string());
    }
    for (k, target) in plan.targets.iter().enumerate() {
        if !plan.within_range(target.point) {
            warnings.push(format!(
                "target out of range: target {} ({:?}) at ({}, {})",
                k + 1,
                target.kind,
                target.point.x,
                target.point.y
            ));
        }
    }
    for p in &plan.positions {
        if !floor.contains(p.point) {
            warnings.push(format!("position {} lies outside the floor", p.index));
        }
    }

    let passed = coverage.fraction >= min_coverage && overlap.connected && sequence_valid;
    Ok(PlanReport {
        scan_count: plan.scan_count(),
        coverage_fraction: coverage.fraction,
        covered_cell_count: coverage.covered_cells,
        total_cell_count: coverage.total_cells,
        uncovered_cell_count: coverage.uncovered_cells,
        min_coverage,
        grid_step,
        overlap_edges: overlap.edges,
        overlap_connected: overlap.connected,
        sequence_valid,
        warnings,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    #[test]
    fn small_room_fully_covered() {
        let floor = FloorOutline::rectangle(20.0, 20.0).unwrap();
        let plan = ScanPlan::from_points(&pts(&[(10.0, 10.0)]), 30.0);
        let c = coverage_fraction(&floor, &plan, 1.0, Execution::default()).unwrap();
        assert_eq!(c.fraction, 1.0);
        assert_eq!(c.total_cells, 400);
    }

    #[test]
    fn empty_plan_covers_nothing() {
        let floor = FloorOutline::rectangle(20.0, 20.0).unwrap();
        let plan = ScanPlan::from_points(&[], 30.0);
        let c = coverage_fraction(&floor, &plan, 1.0, Execution::Sequential).unwrap();
        assert_eq!((c.fraction, c.uncovered_cells), (0.0, 400));
    }

    #[test]
    fn overlap_examples() {
        let near = overlap_graph(&ScanPlan::from_points(&pts(&[(0.0, 0.0), (50.0, 0.0)]), 30.0));
        assert_eq!(near.edges, vec![(1, 2)]);
        assert!(near.connected);
        let far = overlap_graph(&ScanPlan::from_points(&pts(&[(0.0, 0.0), (70.0, 0.0)]), 30.0));
        assert!(far.edges.is_empty());
        assert!(!far.connected);
        let tangent = overlap_graph(&ScanPlan::from_points(&pts(&[(0.0, 0.0), (60.0, 0.0)]), 30.0));
        assert!(tangent.edges.is_empty());
        let single = overlap_graph(&ScanPlan::from_points(&pts(&[(0.0, 0.0)]), 30.0));
        assert!(single.edges.is_empty() && single.connected);
    }

    #[test]
    fn sequence_gap_detected() {
        let mut plan = ScanPlan::from_points(&pts(&[(25.0, 20.0), (75.0, 20.0)]), 30.0);
        plan.positions[1].index = 3;
        assert!(!plan.sequence_valid());
    }

    #[test]
    fn hole_cells_excluded() {
        let hole = Ring(pts(&[(5.0, 5.0), (15.0, 5.0), (15.0, 15.0), (5.0, 15.0)]));
        let floor = FloorOutline::new(FloorOutline::rectangle(20.0, 20.0).unwrap().exterior, vec![hole]).unwrap();
        assert_eq!(floor.area(), 300.0);
        let plan = ScanPlan::from_points(&pts(&[(10.0, 10.0)]), 30.0);
        let c = coverage_fraction(&floor, &plan, 1.0, Execution::Sequential).unwrap();
        assert_eq!(c.total_cells, 300);
    }

    #[test]
    fn hole_outside_exterior_rejected() {
        let hole = Ring(pts(&[(25.0, 5.0), (30.0, 5.0), (30.0, 10.0)]));
        let ext = FloorOutline::rectangle(20.0, 20.0).unwrap().exterior;
        assert!(matches!(FloorOutline::new(ext, vec![hole]), Err(ScanPlanError::InvalidFloor(_))));
    }

    #[test]
    fn geojson_round_trip() {
        let floor = FloorOutline::rectangle(100.0, 40.0).unwrap();
        let text = floor.to_geojson().to_string();
        assert_eq!(FloorOutline::from_geojson(&text).unwrap(), floor);
        let feature = format!("{{\"type\":\"Feature\",\"properties\":{{}},\"geometry\":{text}}}");
        assert_eq!(FloorOutline::from_geojson(&feature).unwrap(), floor);
    }

    #[test]
    fn out_of_range_target_warns() {
        let floor = FloorOutline::rectangle(100.0, 40.0).unwrap();
        let mut plan = ScanPlan::from_points(&pts(&[(25.0, 20.0), (75.0, 20.0)]), 30.0);
        plan.targets.push(Target { kind: TargetKind::Sphere, point: Point::new(500.0, 500.0), height: 5.0 });
        let report = validate_plan(&floor, &plan, 0.99, 1.0, Execution::Sequential).unwrap();
        assert!(report.warnings.iter().any(|w| w.starts_with("target out of range")));
    }
}
