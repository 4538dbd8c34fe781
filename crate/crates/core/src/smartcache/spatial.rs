//! Exact planar predicates on cached geometry.

use super::index::{intersects, Rect};
use crate::geo::{perpendicular_distance, ProjectedPoint};
use crate::warehouse::Geometry;

fn in_rect(p: &ProjectedPoint, r: &Rect) -> bool {
    r[0] <= p.x() && p.x() <= r[2] && r[1] <= p.y() && p.y() <= r[3]
}

/// Liang–Barsky clip test of segment `ab` against `r`.
fn segment_hits_rect(a: &ProjectedPoint, b: &ProjectedPoint, r: &Rect) -> bool {
    let (dx, dy) = (b.x() - a.x(), b.y() - a.y());
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [
        (-dx, a.x() - r[0]),
        (dx, r[2] - a.x()),
        (-dy, a.y() - r[1]),
        (dy, r[3] - a.y()),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return false;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

/// Even-odd point-in-ring test; boundary points may go either way.
fn ring_contains(ring: &[ProjectedPoint], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = ring.len();
    if n < 3 {
        return false;
    }
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = (ring[i].x(), ring[i].y());
        let (xj, yj) = (ring[j].x(), ring[j].y());
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn polygon_contains(rings: &[Vec<ProjectedPoint>], x: f64, y: f64) -> bool {
    match rings.split_first() {
        Some((outer, holes)) => ring_contains(outer, x, y) && !holes.iter().any(|h| ring_contains(h, x, y)),
        None => false,
    }
}

fn segments(g: &Geometry<ProjectedPoint>) -> Vec<(&ProjectedPoint, &ProjectedPoint)> {
    let mut out = Vec::new();
    match g {
        Geometry::Point(_) => {}
        Geometry::PolyLine(v) => out.extend(v.windows(2).map(|w| (&w[0], &w[1]))),
        Geometry::Polygon(rings) => {
            for r in rings {
                out.extend(r.windows(2).map(|w| (&w[0], &w[1])));
            }
        }
        Geometry::MultiPolygon(ps) => {
            for r in ps.iter().flatten() {
                out.extend(r.windows(2).map(|w| (&w[0], &w[1])));
            }
        }
    }
    out
}

/// True when the geometry itself, not just its bounding box, meets `r`.
pub fn geometry_intersects_rect(g: &Geometry<ProjectedPoint>, bbox: &Rect, r: &Rect) -> bool {
    if !intersects(bbox, r) {
        return false;
    }
    match g {
        Geometry::Point(p) => in_rect(p, r),
        Geometry::PolyLine(v) if v.len() == 1 => in_rect(&v[0], r),
        _ => {
            if segments(g).into_iter().any(|(a, b)| segment_hits_rect(a, b, r)) {
                return true;
            }
            // Rectangle wholly inside a polygon.
            g.polygons().into_iter().any(|p| polygon_contains(p, r[0], r[1]))
        }
    }
}

/// Planar distance from `p` to the geometry; zero inside polygons.
pub fn distance_to(g: &Geometry<ProjectedPoint>, p: &ProjectedPoint) -> f64 {
    if let Geometry::Point(q) = g {
        return p.distance(q);
    }
    if g.polygons().into_iter().any(|poly| polygon_contains(poly, p.x(), p.y())) {
        return 0.0;
    }
    let segs = segments(g);
    if segs.is_empty() {
        if let Geometry::PolyLine(v) = g {
            return v.first().map_or(f64::INFINITY, |q| p.distance(q));
        }
    }
    segs.into_iter()
        .map(|(a, b)| perpendicular_distance(p, a, b))
        .fold(f64::INFINITY, f64::min)
}
