//! Planar geometry: the polygonal domain, circular sensors, the embedding box
//! and the feasible set of sensor centers.
//!
//! A placement is feasible when the open sensor disks are pairwise disjoint
//! and contained in the domain: `|x_i - x_j| >= 2r` for all pairs and
//! `d(x_i, boundary) >= r` with `x_i` inside the polygon.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative edge tolerance used by [`Polygon::contains`]; scaled by the
/// polygon diameter.
pub const EDGE_TOLERANCE: f64 = 1e-12;

/// Default sweep budget for [`project_feasible`].
pub const DEFAULT_MAX_SWEEPS: usize = 50;

/// Relative slack added when repairing constraints so that repaired
/// placements pass the exact feasibility test despite rounding.
const REPAIR_SLACK: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    /// Counterclockwise rotation by a quarter turn.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn from_angle(theta: f64) -> Point {
        Point::new(theta.cos(), theta.sin())
    }
}

impl From<[f64; 2]> for Point {
    fn from(a: [f64; 2]) -> Self {
        Point::new(a[0], a[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Closest point to `x` on the segment `[a, b]`.
fn closest_on_segment(x: Point, a: Point, b: Point) -> Point {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return a;
    }
    let t = ((x - a).dot(ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

fn orientation(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Point, b: Point, c: Point) -> bool {
    c.x >= a.x.min(b.x) && c.x <= a.x.max(b.x) && c.y >= a.y.min(b.y) && c.y <= a.y.max(b.y)
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orientation(q1, q2, p1);
    let d2 = orientation(q1, q2, p2);
    let d3 = orientation(p1, p2, q1);
    let d4 = orientation(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// A simple polygon stored as a counterclockwise vertex loop with implicit
/// closure.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
    diameter: f64,
}

impl Polygon {
    /// Validates and normalizes a vertex loop. A repeated closing vertex is
    /// dropped and clockwise input is reversed.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::InvalidPolygon(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(Error::InvalidPolygon("non-finite vertex".into()));
        }
        let n = vertices.len();
        for i in 0..n {
            if vertices[i] == vertices[(i + 1) % n] {
                return Err(Error::InvalidPolygon(format!(
                    "consecutive vertices {i} and {} coincide",
                    (i + 1) % n
                )));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                // adjacent edges share a vertex
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                let (c, d) = (vertices[j], vertices[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return Err(Error::InvalidPolygon(format!("edges {i} and {j} intersect")));
                }
            }
        }
        let area = signed_area(&vertices);
        if area == 0.0 {
            return Err(Error::InvalidPolygon("zero area".into()));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let mut diameter: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                diameter = diameter.max(vertices[i].distance(vertices[j]));
            }
        }
        Ok(Self { vertices, diameter })
    }

    /// Regular `n`-gon inscribed in the circle of the given center and
    /// circumradius, first vertex on the positive x axis.
    pub fn regular(center: Point, circumradius: f64, n: usize) -> Result<Self> {
        let vertices = (0..n)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                center + Point::from_angle(theta) * circumradius
            })
            .collect();
        Self::new(vertices)
    }

    pub fn rectangle(lower: Point, upper: Point) -> Result<Self> {
        Self::new(vec![
            lower,
            Point::new(upper.x, lower.y),
            upper,
            Point::new(lower.x, upper.y),
        ])
    }

    pub fn unit_square() -> Self {
        Self::rectangle(Point::ORIGIN, Point::new(1.0, 1.0)).expect("unit square is valid")
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.distance(b)).sum()
    }

    /// Maximum pairwise vertex distance.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            lo = Point::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Point::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        (lo, hi)
    }

    /// Nearest boundary point together with the index of its edge.
    fn nearest_boundary_point(&self, x: Point) -> (Point, usize) {
        let mut best = (self.vertices[0], 0);
        let mut best_d = f64::INFINITY;
        for (k, (a, b)) in self.edges().enumerate() {
            let c = closest_on_segment(x, a, b);
            let d = x.distance(c);
            if d < best_d {
                best_d = d;
                best = (c, k);
            }
        }
        best
    }

    pub fn boundary_distance(&self, x: Point) -> f64 {
        x.distance(self.nearest_boundary_point(x).0)
    }

    fn crossing_inside(&self, x: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > x.y) != (b.y > x.y) {
                let t = (x.y - a.y) / (b.y - a.y);
                if x.x < a.x + t * (b.x - a.x) {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Inside test; points within the edge tolerance of the boundary count
    /// as inside.
    pub fn contains(&self, x: Point) -> bool {
        if self.boundary_distance(x) <= EDGE_TOLERANCE * self.diameter {
            return true;
        }
        self.crossing_inside(x)
    }

    /// Negative inside, positive outside, zero on the boundary.
    pub fn signed_distance(&self, x: Point) -> f64 {
        let d = self.boundary_distance(x);
        if d <= EDGE_TOLERANCE * self.diameter {
            0.0
        } else if self.crossing_inside(x) {
            -d
        } else {
            d
        }
    }

    /// Unit gradient of the signed distance at `x`. On the boundary the
    /// outward normal of the nearest edge is returned.
    pub fn signed_distance_gradient(&self, x: Point) -> Point {
        let (c, k) = self.nearest_boundary_point(x);
        let d = x.distance(c);
        if d <= EDGE_TOLERANCE * self.diameter {
            let n = self.vertices.len();
            let edge = self.vertices[(k + 1) % n] - self.vertices[k];
            // CCW loop: the outward normal is the clockwise perpendicular.
            return -edge.perp() * (1.0 / edge.norm());
        }
        let dir = (x - c) * (1.0 / d);
        if self.crossing_inside(x) {
            -dir
        } else {
            dir
        }
    }

    /// Reads a polygon from either a plain-text `x y` vertex list or a
    /// GeoJSON-style document (first ring of the first polygon).
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            parse_geojson(text)
        } else {
            parse_vertex_list(text)
        }
    }
}

fn signed_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    0.5 * (0..n).map(|i| vertices[i].cross(vertices[(i + 1) % n])).sum::<f64>()
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: Default::default(),
        line,
        message: message.into(),
    }
}

fn parse_vertex_list(text: &str) -> Result<Polygon> {
    let mut vertices = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        if fields.len() != 2 {
            return Err(parse_error(idx + 1, format!("expected `x y`, got `{line}`")));
        }
        let mut xy = [0.0; 2];
        for (slot, field) in xy.iter_mut().zip(&fields) {
            *slot = field
                .parse()
                .map_err(|_| parse_error(idx + 1, format!("bad number `{field}`")))?;
        }
        vertices.push(Point::from(xy));
    }
    Polygon::new(vertices)
}

fn parse_geojson(text: &str) -> Result<Polygon> {
    let doc: serde_json::Value = serde_json::from_str(text)?;
    let coords = find_coordinates(&doc).ok_or_else(|| Error::InvalidPolygon("no `coordinates` member found".into()))?;
    let ring = first_ring(coords).ok_or_else(|| Error::InvalidPolygon("no coordinate ring found".into()))?;
    Polygon::new(ring)
}

fn find_coordinates(v: &serde_json::Value) -> Option<&serde_json::Value> {
    match v {
        serde_json::Value::Object(map) => {
            if let Some(c) = map.get("coordinates") {
                return Some(c);
            }
            for key in ["geometry", "features", "geometries"] {
                if let Some(found) = map.get(key).and_then(find_coordinates) {
                    return Some(found);
                }
            }
            None
        }
        serde_json::Value::Array(items) => items.iter().find_map(find_coordinates),
        _ => None,
    }
}

/// Descends through nested arrays until it reaches a list of positions.
fn first_ring(v: &serde_json::Value) -> Option<Vec<Point>> {
    let items = v.as_array()?;
    let first = items.first()?;
    let is_position = first
        .as_array()
        .map(|a| a.len() >= 2 && a.iter().all(|c| c.is_number()))
        .unwrap_or(false);
    if is_position {
        items
            .iter()
            .map(|p| {
                let a = p.as_array()?;
                Some(Point::new(a.first()?.as_f64()?, a.get(1)?.as_f64()?))
            })
            .collect()
    } else {
        first_ring(first)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("ball radius {radius} must be positive")));
        }
        Ok(Self { center, radius })
    }

    /// Distance from `x` to the closed ball (zero inside).
    pub fn distance(&self, x: Point) -> f64 {
        (x.distance(self.center) - self.radius).max(0.0)
    }
}

/// Sensor centers sharing a common radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub centers: Vec<Point>,
    pub radius: f64,
}

impl Placement {
    pub fn new(centers: Vec<Point>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "sensor radius {radius} must be positive"
            )));
        }
        Ok(Self { centers, radius })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn balls(&self) -> impl Iterator<Item = Ball> + '_ {
        self.centers.iter().map(move |&center| Ball {
            center,
            radius: self.radius,
        })
    }

    /// Flattened `[x_0, y_0, x_1, y_1, ...]`.
    pub fn coordinates(&self) -> Vec<f64> {
        self.centers.iter().flat_map(|c| [c.x, c.y]).collect()
    }

    pub fn with_coordinates(&self, coords: &[f64]) -> Placement {
        Placement {
            centers: coords.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect(),
            radius: self.radius,
        }
    }

    /// Euclidean distance between two placements viewed as vectors in R^{2N}.
    pub fn displacement(&self, other: &Placement) -> f64 {
        self.centers
            .iter()
            .zip(&other.centers)
            .map(|(a, b)| {
                let d = *a - *b;
                d.dot(d)
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Axis-aligned box that embeds the domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmbeddingBox {
    pub lower: Point,
    pub upper: Point,
}

impl EmbeddingBox {
    pub fn width(&self) -> f64 {
        self.upper.x - self.lower.x
    }

    pub fn height(&self) -> f64 {
        self.upper.y - self.lower.y
    }

    pub fn contains(&self, x: Point) -> bool {
        x.x >= self.lower.x && x.x <= self.upper.x && x.y >= self.lower.y && x.y <= self.upper.y
    }

    /// Distance from an interior point to the box boundary.
    pub fn boundary_distance(&self, x: Point) -> f64 {
        (x.x - self.lower.x)
            .min(self.upper.x - x.x)
            .min(x.y - self.lower.y)
            .min(self.upper.y - x.y)
    }
}

pub fn point_in_polygon(poly: &Polygon, x: Point) -> bool {
    poly.contains(x)
}

pub fn signed_distance_polygon(poly: &Polygon, x: Point) -> f64 {
    poly.signed_distance(x)
}

pub fn polygon_diameter(poly: &Polygon) -> f64 {
    poly.diameter()
}

/// Bounding box of the polygon inflated by its diameter on every side. Any
/// point of the domain is then at least `diam` from the box boundary, and
/// never farther than `diam` from a sensor inside the domain, so the
/// distance to sensors-or-box equals the distance to sensors on the domain.
pub fn compute_box(poly: &Polygon) -> EmbeddingBox {
    let (lo, hi) = poly.bounding_box();
    let m = poly.diameter();
    EmbeddingBox {
        lower: Point::new(lo.x - m, lo.y - m),
        upper: Point::new(hi.x + m, hi.y + m),
    }
}

/// `max(0, min_i |x - c_i| - r)`; infinite for an empty placement.
pub fn exact_distance_to_sensors(x: Point, placement: &Placement) -> f64 {
    let nearest = placement
        .centers
        .iter()
        .map(|c| x.distance(*c))
        .fold(f64::INFINITY, f64::min);
    (nearest - placement.radius).max(0.0)
}

pub fn is_feasible(placement: &Placement, poly: &Polygon) -> bool {
    let r = placement.radius;
    let c = &placement.centers;
    for i in 0..c.len() {
        if !poly.contains(c[i]) || poly.boundary_distance(c[i]) < r {
            return false;
        }
        for j in (i + 1)..c.len() {
            if c[i].distance(c[j]) < 2.0 * r {
                return false;
            }
        }
    }
    true
}

/// Outcome of [`project_feasible`].
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub placement: Placement,
    pub feasible: bool,
    pub sweeps: usize,
}

fn separate_pairs(centers: &mut [Point], r: f64) {
    let target = 2.0 * r * (1.0 + REPAIR_SLACK);
    for i in 0..centers.len() {
        for j in (i + 1)..centers.len() {
            let d = centers[i].distance(centers[j]);
            if d >= 2.0 * r {
                continue;
            }
            let mid = (centers[i] + centers[j]) * 0.5;
            let dir = if d > 0.0 {
                (centers[j] - centers[i]) * (1.0 / d)
            } else {
                Point::new(1.0, 0.0)
            };
            centers[i] = mid - dir * (0.5 * target);
            centers[j] = mid + dir * (0.5 * target);
        }
    }
}

fn push_inside(poly: &Polygon, x: Point, r: f64) -> Point {
    let target = -r * (1.0 + REPAIR_SLACK);
    let mut x = x;
    for _ in 0..64 {
        let sd = poly.signed_distance(x);
        if sd <= target {
            break;
        }
        let grad = poly.signed_distance_gradient(x);
        x = x - grad * (sd - target);
    }
    x
}

/// Constraint repair toward the feasible set: alternating sweeps that push
/// overlapping pairs apart symmetrically and walk centers that are too close
/// to the boundary down the signed-distance gradient. Not an exact Euclidean
/// projection.
pub fn project_feasible(placement: &Placement, poly: &Polygon, max_sweeps: usize) -> Projection {
    let mut centers = placement.centers.clone();
    let r = placement.radius;
    let mut sweeps = 0;
    loop {
        let candidate = Placement {
            centers: centers.clone(),
            radius: r,
        };
        if is_feasible(&candidate, poly) {
            return Projection {
                placement: candidate,
                feasible: true,
                sweeps,
            };
        }
        if sweeps >= max_sweeps {
            return Projection {
                placement: candidate,
                feasible: false,
                sweeps,
            };
        }
        separate_pairs(&mut centers, r);
        for c in centers.iter_mut() {
            if poly.signed_distance(*c) > -r {
                *c = push_inside(poly, *c, r);
            }
        }
        sweeps += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn inside_outside_and_edge() {
        let sq = Polygon::unit_square();
        assert!(point_in_polygon(&sq, pt(0.5, 0.5)));
        assert!(!point_in_polygon(&sq, pt(2.0, 0.5)));
        assert!(point_in_polygon(&sq, pt(1.0, 0.5)));
        assert!(point_in_polygon(&sq, pt(0.0, 0.0)));
    }

    #[test]
    fn signed_distance_square() {
        let sq = Polygon::unit_square();
        assert_eq!(signed_distance_polygon(&sq, pt(0.5, 0.5)), -0.5);
        assert_eq!(signed_distance_polygon(&sq, pt(1.5, 0.5)), 0.5);
        assert_eq!(signed_distance_polygon(&sq, pt(1.0, 0.5)), 0.0);
        // outside a corner the nearest feature is the vertex
        let d = signed_distance_polygon(&sq, pt(2.0, 2.0));
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn diameters() {
        assert!((polygon_diameter(&Polygon::unit_square()) - 2f64.sqrt()).abs() < 1e-15);
        let thin = Polygon::new(vec![pt(0.0, 0.0), pt(1.0, 0.0), pt(0.5, 1e-6)]).unwrap();
        assert!((polygon_diameter(&thin) - 1.0).abs() < 1e-9);
        let hex = Polygon::regular(Point::ORIGIN, 1.0, 6).unwrap();
        assert!((polygon_diameter(&hex) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn box_margin_is_diameter() {
        let b = compute_box(&Polygon::unit_square());
        let s = 2f64.sqrt();
        assert!((b.lower.x + s).abs() < 1e-15 && (b.lower.y + s).abs() < 1e-15);
        assert!((b.upper.x - 1.0 - s).abs() < 1e-15 && (b.upper.y - 1.0 - s).abs() < 1e-15);

        let disk = Polygon::regular(Point::ORIGIN, 1.0, 256).unwrap();
        let b = compute_box(&disk);
        assert!((b.lower.x + 3.0).abs() < 1e-3 && (b.upper.y - 3.0).abs() < 1e-3);
    }

    #[test]
    fn degenerate_polygons_rejected() {
        assert!(matches!(
            Polygon::new(vec![pt(0.0, 0.0), pt(1.0, 0.0)]),
            Err(Error::InvalidPolygon(_))
        ));
        assert!(Polygon::new(vec![pt(0.0, 0.0), pt(0.0, 0.0), pt(1.0, 1.0)]).is_err());
        // bow tie
        let bow = vec![pt(0.0, 0.0), pt(1.0, 1.0), pt(1.0, 0.0), pt(0.0, 1.0)];
        assert!(Polygon::new(bow).is_err());
        // collinear
        assert!(Polygon::new(vec![pt(0.0, 0.0), pt(1.0, 0.0), pt(2.0, 0.0)]).is_err());
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let cw = Polygon::new(vec![pt(0.0, 0.0), pt(0.0, 1.0), pt(1.0, 1.0), pt(1.0, 0.0)]).unwrap();
        assert!(cw.area() > 0.0);
        assert!((cw.area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_distance_examples() {
        let one = Placement::new(vec![Point::ORIGIN], 0.5).unwrap();
        assert_eq!(exact_distance_to_sensors(pt(1.0, 0.0), &one), 0.5);
        assert_eq!(exact_distance_to_sensors(pt(0.2, 0.0), &one), 0.0);
        let two = Placement::new(vec![pt(-1.0, 0.0), pt(1.0, 0.0)], 0.25).unwrap();
        assert_eq!(exact_distance_to_sensors(Point::ORIGIN, &two), 0.75);
    }

    #[test]
    fn feasibility_examples() {
        let sq = Polygon::unit_square();
        let ok = Placement::new(vec![pt(0.3, 0.3), pt(0.7, 0.7)], 0.2).unwrap();
        assert!(is_feasible(&ok, &sq));
        let overlap = Placement::new(vec![pt(0.3, 0.3), pt(0.4, 0.3)], 0.2).unwrap();
        assert!(!is_feasible(&overlap, &sq));
        let wall = Placement::new(vec![pt(0.1, 0.5)], 0.2).unwrap();
        assert!(!is_feasible(&wall, &sq));
        let outside = Placement::new(vec![pt(1.5, 0.5)], 0.2).unwrap();
        assert!(!is_feasible(&outside, &sq));
    }

    #[test]
    fn pair_repair_is_symmetric() {
        let big = Polygon::rectangle(pt(-10.0, -10.0), pt(10.0, 10.0)).unwrap();
        let pl = Placement::new(vec![pt(0.0, 0.0), pt(0.1, 0.0)], 0.5).unwrap();
        let out = project_feasible(&pl, &big, DEFAULT_MAX_SWEEPS);
        assert!(out.feasible);
        let c = &out.placement.centers;
        assert!((c[0].x + 0.45).abs() < 1e-9 && c[0].y == 0.0);
        assert!((c[1].x - 0.55).abs() < 1e-9 && c[1].y == 0.0);
    }

    #[test]
    fn coincident_centers_split_along_x() {
        let big = Polygon::rectangle(pt(-10.0, -10.0), pt(10.0, 10.0)).unwrap();
        let pl = Placement::new(vec![pt(1.0, 2.0), pt(1.0, 2.0)], 0.5).unwrap();
        let out = project_feasible(&pl, &big, DEFAULT_MAX_SWEEPS);
        assert!(out.feasible);
        assert!(out.placement.centers[0].x < out.placement.centers[1].x);
        assert_eq!(out.placement.centers[0].y, 2.0);
    }

    #[test]
    fn feasible_input_is_a_fixed_point() {
        let sq = Polygon::unit_square();
        let pl = Placement::new(vec![pt(0.3, 0.3), pt(0.7, 0.7)], 0.2).unwrap();
        let out = project_feasible(&pl, &sq, DEFAULT_MAX_SWEEPS);
        assert!(out.feasible);
        assert_eq!(out.sweeps, 0);
        assert_eq!(out.placement, pl);
    }

    #[test]
    fn outside_center_is_pulled_in() {
        let sq = Polygon::unit_square();
        let pl = Placement::new(vec![pt(1.3, -0.2)], 0.2).unwrap();
        let out = project_feasible(&pl, &sq, DEFAULT_MAX_SWEEPS);
        assert!(out.feasible);
        assert!(out.placement.centers[0].distance(pt(0.8, 0.2)) < 1e-6);
    }

    #[test]
    fn exhausted_sweeps_flag_infeasible() {
        // three sensors of radius 0.4 do not fit in the unit square
        let sq = Polygon::unit_square();
        let pl = Placement::new(vec![pt(0.5, 0.5), pt(0.5, 0.5), pt(0.5, 0.5)], 0.4).unwrap();
        let out = project_feasible(&pl, &sq, 10);
        assert!(!out.feasible);
        assert_eq!(out.sweeps, 10);
    }

    #[test]
    fn parses_text_and_geojson() {
        let txt = "# square\n0 0\n1 0\n1 1\n0 1\n";
        let p = Polygon::parse(txt).unwrap();
        assert_eq!(p.vertices().len(), 4);
        let geo = r#"{"type":"Feature","geometry":{"type":"Polygon",
            "coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]],[[0.2,0.2],[0.3,0.2],[0.3,0.3]]]}}"#;
        let q = Polygon::parse(geo).unwrap();
        assert_eq!(q.vertices().len(), 4);
        assert!((q.area() - 1.0).abs() < 1e-15);
        match Polygon::parse("0 0\n1 x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    fn hexagon() -> Polygon {
        Polygon::regular(Point::ORIGIN, 1.0, 6).unwrap()
    }

    proptest! {
        #[test]
        fn exact_distance_is_lipschitz(
            ax in -2.0..2.0f64, ay in -2.0..2.0f64, bx in -2.0..2.0f64, by in -2.0..2.0f64,
        ) {
            let pl = Placement::new(vec![pt(0.3, -0.2), pt(-0.5, 0.4)], 0.2).unwrap();
            let (a, b) = (pt(ax, ay), pt(bx, by));
            let diff = (exact_distance_to_sensors(a, &pl) - exact_distance_to_sensors(b, &pl)).abs();
            prop_assert!(diff <= a.distance(b) + 1e-12);
        }

        #[test]
        fn signed_distance_is_lipschitz(
            ax in -2.0..2.0f64, ay in -2.0..2.0f64, bx in -2.0..2.0f64, by in -2.0..2.0f64,
        ) {
            let poly = hexagon();
            let (a, b) = (pt(ax, ay), pt(bx, by));
            let diff = (poly.signed_distance(a) - poly.signed_distance(b)).abs();
            prop_assert!(diff <= a.distance(b) + 1e-12);
        }

        #[test]
        fn zero_level_set_lies_on_edges(k in 0usize..6, t in 0.0..1.0f64) {
            let poly = hexagon();
            let v = poly.vertices();
            let x = v[k] + (v[(k + 1) % 6] - v[k]) * t;
            prop_assert!(poly.signed_distance(x).abs() <= EDGE_TOLERANCE * poly.diameter() * 10.0);
            prop_assert!(poly.contains(x));
        }

        #[test]
        fn repair_restores_feasibility(
            dx in prop::collection::vec(-0.15..0.15f64, 6),
        ) {
            let poly = hexagon();
            let base = [pt(0.0, 0.0), pt(0.45, 0.0), pt(-0.2, 0.4)];
            let centers = base.iter().enumerate().map(|(i, c)| *c + pt(dx[2 * i], dx[2 * i + 1])).collect();
            let pl = Placement::new(centers, 0.2).unwrap();
            let out = project_feasible(&pl, &poly, DEFAULT_MAX_SWEEPS);
            if out.sweeps < DEFAULT_MAX_SWEEPS {
                prop_assert!(out.feasible);
                prop_assert!(is_feasible(&out.placement, &poly));
                // idempotent on its own output
                let again = project_feasible(&out.placement, &poly, DEFAULT_MAX_SWEEPS);
                prop_assert_eq!(again.placement, out.placement);
            }
        }

        #[test]
        fn wall_violations_are_repaired(theta in 0.0..std::f64::consts::TAU, h in 0.0..0.15f64) {
            // center at wall distance r - h
            let poly = Polygon::unit_square();
            let r = 0.2;
            let c = pt(0.5, 0.5) + Point::from_angle(theta) * 0.5;
            let nearest = pt(c.x.clamp(0.0, 1.0), c.y.clamp(0.0, 1.0));
            let inward = (pt(0.5, 0.5) - nearest) * (1.0 / (pt(0.5, 0.5) - nearest).norm());
            let x = nearest + inward * (r - h);
            let pl = Placement::new(vec![x], r).unwrap();
            let out = project_feasible(&pl, &poly, DEFAULT_MAX_SWEEPS);
            prop_assert!(out.feasible);
            prop_assert!(poly.boundary_distance(out.placement.centers[0]) >= r);
        }
    }
}
