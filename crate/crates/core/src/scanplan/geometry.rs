use serde::{Deserialize, Serialize};

/// Planar point in feet. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_squared(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Closed ring of vertices; the closing edge from last to first is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ring(pub Vec<Point>);

impl Ring {
    /// Drops a repeated closing vertex, as GeoJSON rings carry one.
    pub fn from_open_or_closed(mut points: Vec<Point>) -> Self {
        if points.len() > 1 && points.first() == points.last() {
            points.pop();
        }
        Self(points)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.0
    }

    /// Edges as `(vertex[i], vertex[i - 1])`, wrapping at zero.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.0.len();
        (0..n).map(move |i| (self.0[i], self.0[(i + n - 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        self.edges().map(|(a, b)| b.x * a.y - a.x * b.y).sum::<f64>() / 2.0
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.distance_squared(b).sqrt()).sum()
    }

    /// Crossing-number containment test. Points exactly on an edge may land
    /// on either side.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) && p.x < edge_crossing_x(a, b, p.y) {
                inside = !inside;
            }
        }
        inside
    }

    /// True when no two non-adjacent edges touch and adjacent edges meet only
    /// at their shared vertex.
    pub fn is_simple(&self) -> bool {
        let n = self.0.len();
        if n < 3 {
            return false;
        }
        let edges: Vec<(Point, Point)> = self.edges().collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (a, b) = edges[i];
                let (c, d) = edges[j];
                if adjacent {
                    if collinear_overlap(a, b, c, d) {
                        return false;
                    }
                } else if segments_touch(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    pub fn crosses(&self, other: &Ring) -> bool {
        self.edges().any(|(a, b)| other.edges().any(|(c, d)| segments_touch(a, b, c, d)))
    }

    pub fn bounds(&self) -> Option<(Point, Point)> {
        let first = *self.0.first()?;
        Some(self.0.iter().fold((first, first), |(lo, hi), p| {
            (Point::new(lo.x.min(p.x), lo.y.min(p.y)), Point::new(hi.x.max(p.x), hi.y.max(p.y)))
        }))
    }
}

/// x where the edge `a`-`b` crosses the horizontal line at `y`.
pub(crate) fn edge_crossing_x(a: Point, b: Point, y: f64) -> f64 {
    (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x
}

fn orientation(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_touch(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = orientation(a, b, c);
    let o2 = orientation(a, b, d);
    let o3 = orientation(c, d, a);
    let o4 = orientation(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Adjacent edges share one vertex; they are only invalid if they fold back
/// over each other.
fn collinear_overlap(a: Point, b: Point, c: Point, d: Point) -> bool {
    if orientation(a, b, c) != 0.0 || orientation(a, b, d) != 0.0 {
        return false;
    }
    let shared = [a, b].into_iter().find(|p| *p == c || *p == d);
    let Some(shared) = shared else { return segments_touch(a, b, c, d) };
    let other1 = if a == shared { b } else { a };
    let other2 = if c == shared { d } else { c };
    let v1 = (other1.x - shared.x, other1.y - shared.y);
    let v2 = (other2.x - shared.x, other2.y - shared.y);
    v1.0 * v2.0 + v1.1 * v2.1 > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(pts: &[(f64, f64)]) -> Ring {
        Ring(pts.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    #[test]
    fn square_area_and_containment() {
        let sq = ring(&[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)]);
        assert_eq!(sq.area(), 100.0);
        assert_eq!(sq.perimeter(), 40.0);
        assert!(sq.contains(Point::new(5.0, 5.0)));
        assert!(!sq.contains(Point::new(15.0, 5.0)));
        assert!(sq.is_simple());
    }

    #[test]
    fn bowtie_is_not_simple() {
        let bow = ring(&[(0.0, 0.0), (10.0, 10.0), (10.0, 0.0), (0.0, 10.0)]);
        assert!(!bow.is_simple());
    }

    #[test]
    fn closing_vertex_dropped() {
        let r = Ring::from_open_or_closed(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0), Point::new(0.0, 0.0)]);
        assert_eq!(r.vertices().len(), 3);
    }
}
