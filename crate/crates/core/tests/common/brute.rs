//! Cubic-time reference geometry: hull edges by exhaustive pair testing,
//! area from the hull edges alone, membership by Carathéodory triangles.

pub type Point = (f64, f64);

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    cross(a, b, p) == 0.0 && p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

fn distinct(points: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::new();
    for &p in points {
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// Directed counter-clockwise hull edges: every other point lies strictly to
/// the left or on the closed segment.
pub fn hull_edges(points: &[Point]) -> Vec<(Point, Point)> {
    let pts = distinct(points);
    let mut edges = Vec::new();
    for &a in &pts {
        for &b in &pts {
            if a == b {
                continue;
            }
            let ok = pts.iter().all(|&k| k == a || k == b || cross(a, b, k) > 0.0 || on_segment(k, a, b));
            let full = pts.iter().any(|&k| cross(a, b, k) > 0.0);
            if ok && full {
                edges.push((a, b));
            }
        }
    }
    edges
}

/// Hull vertices, unordered: endpoints of the hull edges, or the distinct
/// extreme points of a degenerate set.
pub fn hull_vertices(points: &[Point]) -> Vec<Point> {
    let pts = distinct(points);
    let edges = hull_edges(&pts);
    if edges.is_empty() {
        // Collinear or fewer than three points: the two farthest apart.
        let mut best = (pts.first().copied(), pts.first().copied(), -1.0);
        for &a in &pts {
            for &b in &pts {
                let d = (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2);
                if d > best.2 {
                    best = (Some(a), Some(b), d);
                }
            }
        }
        return match best {
            (Some(a), Some(b), _) if a != b => {
                let mut v = vec![a, b];
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                v
            }
            (Some(a), _, _) => vec![a],
            _ => Vec::new(),
        };
    }
    let mut v: Vec<Point> = edges.iter().map(|e| e.0).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    v
}

/// Area from the hull edges without ordering them.
pub fn hull_area(points: &[Point]) -> f64 {
    0.5 * hull_edges(points).iter().map(|&(a, b)| a.0 * b.1 - b.0 * a.1).sum::<f64>()
}

/// Is `p` in the convex hull of `points`? Some triangle or segment of the
/// set must contain it.
pub fn in_hull(points: &[Point], p: Point) -> bool {
    let pts = distinct(points);
    let n = pts.len();
    for i in 0..n {
        if pts[i] == p {
            return true;
        }
        for j in i + 1..n {
            if on_segment(p, pts[i], pts[j]) {
                return true;
            }
            for k in j + 1..n {
                let (a, b, c) = (pts[i], pts[j], pts[k]);
                let s = [cross(a, b, p), cross(b, c, p), cross(c, a, p)];
                let area = cross(a, b, c);
                if area != 0.0 && s.iter().all(|&x| x * area >= 0.0) {
                    return true;
                }
            }
        }
    }
    false
}

/// Compare the library's hull, shoelace area and containment against the
/// reference on one point set; `None` when everything agrees.
pub fn mismatch(points: &[Point], queries: &[Point]) -> Option<String> {
    use flexmap::geometry::{contains, convex_hull, shoelace, signed_area};

    let hull = convex_hull(points);
    let mut got = hull.vertices.clone();
    got.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let want = hull_vertices(points);
    if got != want {
        return Some(format!("hull of {points:?}: {got:?} vs {want:?}"));
    }
    let area = hull_area(points);
    let lib = if hull.vertices.len() >= 3 {
        match shoelace(&hull.vertices) {
            Ok(a) => a,
            Err(e) => return Some(format!("shoelace of {points:?}: {e}")),
        }
    } else {
        0.0
    };
    if (lib - area).abs() > 1e-9 * area.abs().max(1.0) || signed_area(&hull.vertices) < 0.0 {
        return Some(format!("area of {points:?}: {lib} vs {area}"));
    }
    for &q in points.iter().chain(queries) {
        let inside = match contains(&hull, q) {
            Ok(b) => b,
            Err(e) => return Some(format!("containment in hull of {points:?}: {e}")),
        };
        if inside != in_hull(points, q) {
            return Some(format!("containment of {q:?} in {points:?}: {inside}"));
        }
    }
    None
}
