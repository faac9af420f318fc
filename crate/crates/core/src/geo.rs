//! Geometry primitives, distance kernels, point-in-polygon and a bucket-grid
//! nearest-feature index.
//!
//! Two coordinate modes exist. `Planar` coordinates are meters and distances
//! are Euclidean. `Geodesic` coordinates are (longitude, latitude) degrees and
//! distances are haversine meters on a sphere of radius [`EARTH_RADIUS_M`].

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Default bucket size of the spatial index, in meters.
pub const DEFAULT_INDEX_CELL_M: f64 = 3_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    #[default]
    Planar,
    Geodesic,
}

impl DistanceMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DistanceMode::Planar => "planar",
            DistanceMode::Geodesic => "geodesic",
        }
    }

    /// Checks the coordinate invariants of the mode.
    pub fn validate(&self, p: Point) -> Result<()> {
        if !p.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite coordinate ({}, {})",
                p.x, p.y
            )));
        }
        if *self == DistanceMode::Geodesic
            && !((-180.0..=180.0).contains(&p.x) && (-90.0..=90.0).contains(&p.y))
        {
            return Err(Error::Domain(format!(
                "coordinate ({}, {}) outside lon [-180, 180] / lat [-90, 90]",
                p.x, p.y
            )));
        }
        Ok(())
    }

    /// Distance in meters between two points already valid in this mode.
    #[inline]
    pub fn distance(&self, a: Point, b: Point) -> f64 {
        match self {
            DistanceMode::Planar => planar_distance(a, b),
            DistanceMode::Geodesic => haversine(a, b),
        }
    }

    /// Converts a length in meters to coordinate units of this mode.
    ///
    /// For geodesic mode this is degrees of latitude, which is the tightest
    /// scale valid everywhere on the sphere.
    pub fn meters_to_units(&self, meters: f64) -> f64 {
        match self {
            DistanceMode::Planar => meters,
            DistanceMode::Geodesic => meters / (EARTH_RADIUS_M * PI / 180.0),
        }
    }
}

pub fn planar_distance(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Great-circle distance; errors on coordinates outside lon/lat ranges.
pub fn geodesic_distance(a: Point, b: Point) -> Result<f64> {
    DistanceMode::Geodesic.validate(a)?;
    DistanceMode::Geodesic.validate(b)?;
    Ok(haversine(a, b))
}

fn haversine(a: Point, b: Point) -> f64 {
    let (phi1, phi2) = (a.y.to_radians(), b.y.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.x - a.x).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.clamp(0.0, 1.0).sqrt().asin()
}

/// Simple polygon with optional holes. Rings are stored closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    exterior: Vec<Point>,
    holes: Vec<Vec<Point>>,
}

impl Polygon {
    pub fn new(exterior: Vec<Point>, holes: Vec<Vec<Point>>) -> Result<Self> {
        let exterior = close_ring(exterior, "exterior")?;
        if ring_has_self_intersection(&exterior) {
            return Err(Error::Domain("polygon exterior ring self-intersects".into()));
        }
        let holes = holes
            .into_iter()
            .map(|h| close_ring(h, "hole"))
            .collect::<Result<Vec<_>>>()?;
        let poly = Polygon { exterior, holes };
        if !(poly.area() > 0.0) {
            return Err(Error::Domain("polygon area is not positive".into()));
        }
        Ok(poly)
    }

    pub fn exterior(&self) -> &[Point] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Vec<Point>] {
        &self.holes
    }

    /// Planar area (coordinate units squared) of the exterior minus holes.
    pub fn area(&self) -> f64 {
        ring_area(&self.exterior).abs() - self.holes.iter().map(|h| ring_area(h).abs()).sum::<f64>()
    }

    /// Arithmetic mean of the distinct exterior vertices.
    pub fn vertex_centroid(&self) -> Point {
        let ring = &self.exterior[..self.exterior.len() - 1];
        let n = ring.len() as f64;
        let (sx, sy) = ring.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        Point::new(sx / n, sy / n)
    }

    /// (min_x, min_y, max_x, max_y) of the exterior.
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        self.exterior.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), p| (a.min(p.x), b.min(p.y), c.max(p.x), d.max(p.y)),
        )
    }

    /// Inclusive containment: boundary points (including hole boundaries) are inside.
    pub fn contains(&self, p: Point) -> bool {
        let (x0, y0, x1, y1) = self.bbox();
        if p.x < x0 || p.x > x1 || p.y < y0 || p.y > y1 {
            return false;
        }
        match ring_locate(&self.exterior, p) {
            Location::Boundary => return true,
            Location::Outside => return false,
            Location::Inside => {}
        }
        self.holes
            .iter()
            .all(|h| ring_locate(h, p) != Location::Inside)
    }
}

pub fn point_in_polygon(p: Point, poly: &Polygon) -> bool {
    poly.contains(p)
}

fn close_ring(mut ring: Vec<Point>, what: &str) -> Result<Vec<Point>> {
    if let Some(bad) = ring.iter().find(|p| !p.is_finite()) {
        return Err(Error::Domain(format!(
            "non-finite vertex ({}, {}) in {what} ring",
            bad.x, bad.y
        )));
    }
    ring.dedup();
    if ring.len() >= 2 && ring.first() == ring.last() {
        ring.pop();
    }
    if ring.len() < 3 {
        return Err(Error::Domain(format!(
            "{what} ring has fewer than 3 distinct vertices"
        )));
    }
    ring.push(ring[0]);
    Ok(ring)
}

fn ring_area(ring: &[Point]) -> f64 {
    ring.windows(2)
        .map(|w| w[0].x * w[1].y - w[1].x * w[0].y)
        .sum::<f64>()
        / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Location {
    Inside,
    Boundary,
    Outside,
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    if p.x < a.x.min(b.x) || p.x > a.x.max(b.x) || p.y < a.y.min(b.y) || p.y > a.y.max(b.y) {
        return false;
    }
    let scale = planar_distance(a, b) * planar_distance(a, p);
    cross(a, b, p).abs() <= 1e-12 * scale
}

/// Even-odd ray crossing against a closed ring, with an explicit boundary check.
fn ring_locate(ring: &[Point], p: Point) -> Location {
    let mut inside = false;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if on_segment(p, a, b) {
            return Location::Boundary;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    if inside {
        Location::Inside
    } else {
        Location::Outside
    }
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

fn ring_has_self_intersection(ring: &[Point]) -> bool {
    let n = ring.len() - 1;
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            let (a, b, c, d) = (ring[i], ring[i + 1], ring[j], ring[j + 1]);
            if adjacent {
                // Adjacent edges share one vertex; they only conflict when they fold back.
                let shared = if j == i + 1 { b } else { a };
                let (u, v) = if j == i + 1 { (a, d) } else { (b, c) };
                if cross(shared, u, v) == 0.0
                    && ((u.x - shared.x) * (v.x - shared.x) + (u.y - shared.y) * (v.y - shared.y))
                        > 0.0
                {
                    return true;
                }
            } else if segments_intersect(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

/// Uniform bucket grid over points for nearest-distance queries.
///
/// Results are exactly the minimum of the mode's distance kernel over all
/// inserted points, matching a linear scan bit for bit.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    mode: DistanceMode,
    cell_size: f64,
    buckets: HashMap<(i64, i64), Vec<Point>>,
    key_min: (i64, i64),
    key_max: (i64, i64),
    len: usize,
}

impl SpatialIndex {
    /// `cell_size` is in coordinate units of `mode` (meters or degrees).
    pub fn new(points: &[Point], cell_size: f64, mode: DistanceMode) -> Result<Self> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::Domain(format!(
                "index cell size must be positive, got {cell_size}"
            )));
        }
        let mut index = SpatialIndex {
            mode,
            cell_size,
            buckets: HashMap::new(),
            key_min: (i64::MAX, i64::MAX),
            key_max: (i64::MIN, i64::MIN),
            len: 0,
        };
        for &p in points {
            mode.validate(p)?;
            let k = index.key(p);
            index.key_min = (index.key_min.0.min(k.0), index.key_min.1.min(k.1));
            index.key_max = (index.key_max.0.max(k.0), index.key_max.1.max(k.1));
            index.buckets.entry(k).or_default().push(p);
            index.len += 1;
        }
        Ok(index)
    }

    /// Index with the default 3,000 m bucket size converted to `mode` units.
    pub fn with_default_cell(points: &[Point], mode: DistanceMode) -> Result<Self> {
        Self::new(points, mode.meters_to_units(DEFAULT_INDEX_CELL_M), mode)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn mode(&self) -> DistanceMode {
        self.mode
    }

    fn key(&self, p: Point) -> (i64, i64) {
        (
            (p.x / self.cell_size).floor() as i64,
            (p.y / self.cell_size).floor() as i64,
        )
    }

    fn scan_bucket(&self, key: (i64, i64), q: Point, best: &mut f64) {
        if let Some(points) = self.buckets.get(&key) {
            for &p in points {
                let d = self.mode.distance(q, p);
                if d < *best {
                    *best = d;
                }
            }
        }
    }

    pub fn nearest_distance(&self, q: Point) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::Domain("empty feature layer".into()));
        }
        self.mode.validate(q)?;
        let kq = self.key(q);
        let mut best = f64::INFINITY;
        // Shrinks ring lower bounds so that floor() rounding at bucket edges cannot end the search early.
        const SLACK: f64 = 1.0 - 1e-9;
        match self.mode {
            DistanceMode::Planar => {
                let (x0, y0) = self.key_min;
                let (x1, y1) = self.key_max;
                let first = [x0 - kq.0, kq.0 - x1, y0 - kq.1, kq.1 - y1]
                    .into_iter()
                    .max()
                    .unwrap()
                    .max(0);
                let last = [kq.0 - x0, x1 - kq.0, kq.1 - y0, y1 - kq.1]
                    .into_iter()
                    .max()
                    .unwrap()
                    .max(0);
                for r in first..=last {
                    let ylo = (kq.1 - r).max(y0);
                    let yhi = (kq.1 + r).min(y1);
                    for ky in ylo..=yhi {
                        if (ky - kq.1).abs() == r {
                            for kx in (kq.0 - r).max(x0)..=(kq.0 + r).min(x1) {
                                self.scan_bucket((kx, ky), q, &mut best);
                            }
                        } else {
                            for kx in [kq.0 - r, kq.0 + r] {
                                if (x0..=x1).contains(&kx) && (r > 0 || kx == kq.0) {
                                    self.scan_bucket((kx, ky), q, &mut best);
                                }
                            }
                        }
                    }
                    if best <= r as f64 * self.cell_size * SLACK {
                        break;
                    }
                }
            }
            DistanceMode::Geodesic => {
                // Only latitude separation bounds great-circle distance from below,
                // so whole rows of buckets are scanned outward from the query row.
                let (x0, y0) = self.key_min;
                let (x1, y1) = self.key_max;
                let meters_per_unit = EARTH_RADIUS_M * PI / 180.0;
                let first = (y0 - kq.1).max(kq.1 - y1).max(0);
                let last = (kq.1 - y0).max(y1 - kq.1).max(0);
                for r in first..=last {
                    let rows: &[i64] = if r == 0 { &[kq.1] } else { &[kq.1 - r, kq.1 + r] };
                    for &ky in rows {
                        if (y0..=y1).contains(&ky) {
                            for kx in x0..=x1 {
                                self.scan_bucket((kx, ky), q, &mut best);
                            }
                        }
                    }
                    if best <= r as f64 * self.cell_size * meters_per_unit * SLACK {
                        break;
                    }
                }
            }
        }
        Ok(best)
    }
}
