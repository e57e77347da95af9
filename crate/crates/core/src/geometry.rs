//! Polygon arithmetic on PQ regions.

use thiserror::Error;

pub type Point = (f64, f64);

/// Half-plane slack accepted by [`contains`].
pub const CONTAINS_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon is not convex")]
    NotConvex,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        Polygon { vertices }
    }

    /// Drop consecutive duplicates, including a closing repeat of the first
    /// vertex.
    pub fn normalize(&self) -> Polygon {
        let mut out: Vec<Point> = Vec::with_capacity(self.vertices.len());
        for &v in &self.vertices {
            if out.last() != Some(&v) {
                out.push(v);
            }
        }
        while out.len() > 1 && out.first() == out.last() {
            out.pop();
        }
        Polygon { vertices: out }
    }

    pub fn area(&self) -> Result<f64, GeometryError> {
        shoelace(&self.vertices)
    }

    pub fn bounding_box(&self) -> Option<(Point, Point)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), &(x, y)| {
            ((lo.0.min(x), lo.1.min(y)), (hi.0.max(x), hi.1.max(y)))
        }))
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Signed shoelace sum, positive for counter-clockwise order. Accepts any
/// number of vertices.
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        s += a.0 * b.1 - b.0 * a.1;
    }
    0.5 * s
}

pub fn shoelace(poly: &[Point]) -> Result<f64, GeometryError> {
    if poly.len() < 3 {
        return Err(GeometryError::TooFewVertices(poly.len()));
    }
    Ok(signed_area(poly).abs())
}

/// Counter-clockwise hull by monotone chain; collinear points are dropped.
pub fn convex_hull(points: &[Point]) -> Polygon {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return Polygon::new(pts);
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    Polygon::new(hull)
}

/// Is the polygon convex? Orientation may be either way; degenerate
/// (collinear) turns are allowed.
pub fn is_convex(poly: &[Point]) -> bool {
    // Vertices closer than this to their predecessor carry no turn.
    let mut kept: Vec<Point> = Vec::with_capacity(poly.len());
    for &p in poly {
        if kept.last().is_none_or(|&q| dist(p, q) > 1e-9) {
            kept.push(p);
        }
    }
    while kept.len() > 1 && dist(kept[0], kept[kept.len() - 1]) <= 1e-9 {
        kept.pop();
    }
    let poly = &kept[..];
    let n = poly.len();
    if n < 3 {
        return true;
    }
    let mut sign = 0.0_f64;
    for i in 0..n {
        let (a, b, c) = (poly[i], poly[(i + 1) % n], poly[(i + 2) % n]);
        let c = cross(a, b, c) / (dist(a, b) * dist(b, c));
        if c.abs() <= 1e-9 {
            continue;
        }
        if sign == 0.0 {
            sign = c.signum();
        } else if c.signum() != sign {
            return false;
        }
    }
    // A convex polygon turns around exactly once.
    let mut winding = 0.0;
    for i in 0..n {
        let (a, b, c) = (poly[i], poly[(i + 1) % n], poly[(i + 2) % n]);
        let u = (b.0 - a.0, b.1 - a.1);
        let v = (c.0 - b.0, c.1 - b.1);
        if (u.0 == 0.0 && u.1 == 0.0) || (v.0 == 0.0 && v.1 == 0.0) {
            continue;
        }
        winding += (u.0 * v.1 - u.1 * v.0).atan2(u.0 * v.0 + u.1 * v.1);
    }
    winding.abs() < 2.0 * std::f64::consts::PI + 1e-6
}

/// Point-in-convex-polygon with tolerance `tol` on each edge's half-plane
/// (distance units). Degenerate polygons reduce to segment or point tests.
pub fn contains_tol(poly: &Polygon, point: Point, tol: f64) -> Result<bool, GeometryError> {
    let norm = poly.normalize();
    let v = &norm.vertices;
    if !is_convex(v) {
        return Err(GeometryError::NotConvex);
    }
    match v.len() {
        0 => return Ok(false),
        1 => return Ok(dist(v[0], point) <= tol),
        2 => return Ok(segment_distance(point, v[0], v[1]) <= tol),
        _ => {}
    }
    let orient = if signed_area(v) >= 0.0 { 1.0 } else { -1.0 };
    if signed_area(v).abs() <= 0.0 {
        let d = (0..v.len())
            .map(|i| segment_distance(point, v[i], v[(i + 1) % v.len()]))
            .fold(f64::INFINITY, f64::min);
        return Ok(d <= tol);
    }
    for i in 0..v.len() {
        let (a, b) = (v[i], v[(i + 1) % v.len()]);
        let len = dist(a, b);
        if len == 0.0 {
            continue;
        }
        if orient * cross(a, b, point) / len < -tol {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn contains(poly: &Polygon, point: Point) -> Result<bool, GeometryError> {
    contains_tol(poly, point, CONTAINS_TOL)
}

fn dist(a: Point, b: Point) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = (b.0 - a.0, b.1 - a.1);
    let len2 = d.0 * d.0 + d.1 * d.1;
    if len2 == 0.0 {
        return dist(p, a);
    }
    let s = (((p.0 - a.0) * d.0 + (p.1 - a.1) * d.1) / len2).clamp(0.0, 1.0);
    dist(p, (a.0 + s * d.0, a.1 + s * d.1))
}

/// Distance from a point to a convex polygon (zero inside).
pub fn distance_to(poly: &Polygon, p: Point) -> Result<f64, GeometryError> {
    if contains_tol(poly, p, 0.0)? {
        return Ok(0.0);
    }
    let v = &poly.vertices;
    Ok((0..v.len())
        .map(|i| segment_distance(p, v[i], v[(i + 1) % v.len()]))
        .fold(f64::INFINITY, f64::min))
}

/// Hausdorff distance between two convex polygons. For convex sets the
/// farthest point of one from the other is attained at a vertex.
pub fn region_gap(a: &Polygon, b: &Polygon) -> Result<f64, GeometryError> {
    let (a, b) = (a.normalize(), b.normalize());
    for p in [&a, &b] {
        if p.vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(p.vertices.len()));
        }
        if !is_convex(&p.vertices) {
            return Err(GeometryError::NotConvex);
        }
    }
    let one_way = |x: &Polygon, y: &Polygon| -> Result<f64, GeometryError> {
        x.vertices.iter().try_fold(0.0_f64, |m, &p| Ok(m.max(distance_to(y, p)?)))
    };
    Ok(one_way(&a, &b)?.max(one_way(&b, &a)?))
}
