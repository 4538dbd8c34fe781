//! Independent reference computations. None of these call into the
//! implementation paths they are used to check.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

pub const WGS84_A: f64 = 6_378_137.0;
pub const WGS84_INV_F: f64 = 298.257_223_563;
pub const R_AUTH: f64 = 6_371_008.8;

fn e2_of(inv_f: f64) -> f64 {
    let f = 1.0 / inv_f;
    2.0 * f - f * f
}

/// Redfearn's series for transverse Mercator (origin latitude 0).
pub fn redfearn_forward(a: f64, inv_f: f64, k0: f64, fe: f64, fnorth: f64, cm: f64, lon: f64, lat: f64) -> (f64, f64) {
    let e2 = e2_of(inv_f);
    let e4 = e2 * e2;
    let e6 = e4 * e2;
    let phi = lat.to_radians();
    let mut dl = lon - cm;
    if dl > 180.0 {
        dl -= 360.0;
    }
    if dl < -180.0 {
        dl += 360.0;
    }
    let w = dl.to_radians();
    let a0 = 1.0 - e2 / 4.0 - 3.0 * e4 / 64.0 - 5.0 * e6 / 256.0;
    let a2 = 3.0 / 8.0 * (e2 + e4 / 4.0 + 15.0 * e6 / 128.0);
    let a4 = 15.0 / 256.0 * (e4 + 3.0 * e6 / 4.0);
    let a6 = 35.0 * e6 / 3072.0;
    let m = a * (a0 * phi - a2 * (2.0 * phi).sin() + a4 * (4.0 * phi).sin() - a6 * (6.0 * phi).sin());
    let s = phi.sin();
    let c = phi.cos();
    let t = phi.tan();
    let t2 = t * t;
    let nu = a / (1.0 - e2 * s * s).sqrt();
    let rho = a * (1.0 - e2) / (1.0 - e2 * s * s).powf(1.5);
    let psi = nu / rho;
    let wc = w * c;
    let e_terms = 1.0
        + wc.powi(2) / 6.0 * (psi - t2)
        + wc.powi(4) / 120.0 * (4.0 * psi.powi(3) * (1.0 - 6.0 * t2) + psi * psi * (1.0 + 8.0 * t2) - psi * 2.0 * t2 + t2 * t2)
        + wc.powi(6) / 5040.0 * (61.0 - 479.0 * t2 + 179.0 * t2 * t2 - t2.powi(3));
    let easting = fe + k0 * nu * wc * e_terms;
    let n1 = nu * s * w * w * c / 2.0;
    let n2 = nu * s * w.powi(4) * c.powi(3) / 24.0 * (4.0 * psi * psi + psi - t2);
    let n3 = nu * s * w.powi(6) * c.powi(5) / 720.0
        * (8.0 * psi.powi(4) * (11.0 - 24.0 * t2) - 28.0 * psi.powi(3) * (1.0 - 6.0 * t2) + psi * psi * (1.0 - 32.0 * t2)
            - psi * 2.0 * t2
            + t2 * t2);
    let n4 = nu * s * w.powi(8) * c.powi(7) / 40320.0 * (1385.0 - 3111.0 * t2 + 543.0 * t2 * t2 - t2.powi(3));
    let northing = fnorth + k0 * (m + n1 + n2 + n3 + n4);
    (easting, northing)
}

/// Textbook geodetic → ECEF with plain trigonometry.
pub fn ecef(a: f64, inv_f: f64, lon: f64, lat: f64, h: f64) -> [f64; 3] {
    let e2 = e2_of(inv_f);
    let (phi, lam) = (lat.to_radians(), lon.to_radians());
    let n = a / (1.0 - e2 * phi.sin().powi(2)).sqrt();
    [
        (n + h) * phi.cos() * lam.cos(),
        (n + h) * phi.cos() * lam.sin(),
        (n * (1.0 - e2) + h) * phi.sin(),
    ]
}

/// Position-vector Helmert shift written as an explicit matrix product.
pub fn helmert_matrix(t: [f64; 3], rot_arcsec: [f64; 3], ppm: f64, xyz: [f64; 3]) -> [f64; 3] {
    let r = rot_arcsec.map(|v| (v / 3600.0).to_radians());
    let m = Matrix3::new(1.0, -r[2], r[1], r[2], 1.0, -r[0], -r[1], r[0], 1.0);
    let out = Vector3::from(t) + (1.0 + ppm * 1e-6) * (m * Vector3::from(xyz));
    [out.x, out.y, out.z]
}

/// Least squares via SVD of the uncentred design matrix `[x y 1]`.
/// Returns the six coefficients and the rms residual.
pub fn affine_lstsq(src: &[(f64, f64)], dst: &[(f64, f64)]) -> ([f64; 6], f64) {
    let n = src.len();
    let design = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => src[i].0,
        1 => src[i].1,
        _ => 1.0,
    });
    let svd = design.clone().svd(true, true);
    let bx = DVector::from_fn(n, |i, _| dst[i].0);
    let by = DVector::from_fn(n, |i, _| dst[i].1);
    let px = svd.solve(&bx, 1e-15).unwrap();
    let py = svd.solve(&by, 1e-15).unwrap();
    let rx = &design * &px - bx;
    let ry = &design * &py - by;
    let ss: f64 = (0..n).map(|i| rx[i] * rx[i] + ry[i] * ry[i]).sum();
    ([px[0], px[1], px[2], py[0], py[1], py[2]], (ss / n as f64).sqrt())
}

/// Spherical law of cosines.
pub fn distance_cosines(lon1: f64, lat1: f64, lon2: f64, lat2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dl = (lon2 - lon1).to_radians();
    let c = p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos();
    R_AUTH * c.clamp(-1.0, 1.0).acos()
}

/// Area between the equator and the great circle through (lon0, lat) and
/// (lon0 + width, lat), integrated over longitude with composite Simpson.
pub fn equator_quad_area(width_deg: f64, lat_deg: f64, intervals: usize) -> f64 {
    let w = width_deg.to_radians();
    let tphi = lat_deg.to_radians().tan();
    // Great circle through two points at equal latitude.
    let lat_at = |lam: f64| ((tphi * (w - lam).sin() + tphi * lam.sin()) / w.sin()).atan();
    let h = w / intervals as f64;
    let mut sum = lat_at(0.0).sin() + lat_at(w).sin();
    for i in 1..intervals {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += weight * lat_at(i as f64 * h).sin();
    }
    R_AUTH * R_AUTH * sum * h / 3.0
}

/// Recursive Douglas–Peucker on plain tuples.
pub fn dp_recursive(pts: &[(f64, f64)], tol: f64) -> Vec<(f64, f64)> {
    fn seg_dist(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let l2 = dx * dx + dy * dy;
        if l2 == 0.0 {
            return ((p.0 - a.0).powi(2) + (p.1 - a.1).powi(2)).sqrt();
        }
        let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / l2).clamp(0.0, 1.0);
        ((p.0 - a.0 - t * dx).powi(2) + (p.1 - a.1 - t * dy).powi(2)).sqrt()
    }
    fn rec(pts: &[(f64, f64)], tol: f64, out: &mut Vec<(f64, f64)>) {
        let last = pts.len() - 1;
        let mut best = (0.0, 0);
        for i in 1..last {
            let d = seg_dist(pts[i], pts[0], pts[last]);
            if d > best.0 {
                best = (d, i);
            }
        }
        if best.0 > tol {
            rec(&pts[..=best.1], tol, out);
            out.pop();
            rec(&pts[best.1..], tol, out);
        } else {
            out.push(pts[0]);
            out.push(pts[last]);
        }
    }
    if pts.len() < 3 || tol == 0.0 {
        return pts.to_vec();
    }
    let mut out = Vec::new();
    rec(pts, tol, &mut out);
    out
}

/// Planar shoelace area (absolute).
pub fn shoelace(ring: &[(f64, f64)]) -> f64 {
    let mut s = 0.0;
    for w in ring.windows(2) {
        s += w[0].0 * w[1].1 - w[1].0 * w[0].1;
    }
    s.abs() / 2.0
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn on_segment(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

/// Closed-segment intersection by orientation signs.
pub fn segments_cross(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// Winding-number containment for a closed ring.
pub fn winding_contains(ring: &[(f64, f64)], p: (f64, f64)) -> bool {
    let mut wn = 0i32;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.1 <= p.1 {
            if b.1 > p.1 && orient(a, b, p) > 0.0 {
                wn += 1;
            }
        } else if b.1 <= p.1 && orient(a, b, p) < 0.0 {
            wn -= 1;
        }
    }
    wn != 0
}

/// Whether a polygon (outer ring first, then holes) or polyline (`rings`
/// with one open chain, `polygon = false`) meets the rectangle.
pub fn shape_meets_rect(rings: &[Vec<(f64, f64)>], polygon: bool, r: [f64; 4]) -> bool {
    let inside = |p: (f64, f64)| r[0] <= p.0 && p.0 <= r[2] && r[1] <= p.1 && p.1 <= r[3];
    let corners = [(r[0], r[1]), (r[2], r[1]), (r[2], r[3]), (r[0], r[3]), (r[0], r[1])];
    for ring in rings {
        if ring.iter().any(|&p| inside(p)) {
            return true;
        }
        for s in ring.windows(2) {
            for e in corners.windows(2) {
                if segments_cross(s[0], s[1], e[0], e[1]) {
                    return true;
                }
            }
        }
    }
    polygon
        && winding_contains(&rings[0], corners[0])
        && !rings[1..].iter().any(|h| winding_contains(h, corners[0]))
}

pub fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    ((p.0 - a.0 - t * dx).powi(2) + (p.1 - a.1 - t * dy).powi(2)).sqrt()
}

/// Distance from `p` to a shape; zero inside polygons.
pub fn shape_distance(rings: &[Vec<(f64, f64)>], polygon: bool, p: (f64, f64)) -> f64 {
    if polygon && winding_contains(&rings[0], p) && !rings[1..].iter().any(|h| winding_contains(h, p)) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for ring in rings {
        if ring.len() == 1 {
            best = best.min(((p.0 - ring[0].0).powi(2) + (p.1 - ring[0].1).powi(2)).sqrt());
        }
        for s in ring.windows(2) {
            best = best.min(point_segment_distance(p, s[0], s[1]));
        }
    }
    best
}

/// Area of a spherical polygon as a fan of triangles, each with its signed
/// excess from the Van Oosterom–Strackee formula. `ring` need not be closed.
pub fn fan_excess_area(ring: &[(f64, f64)]) -> f64 {
    let v = |(lon, lat): (f64, f64)| {
        let (l, p) = (lon.to_radians(), lat.to_radians());
        [p.cos() * l.cos(), p.cos() * l.sin(), p.sin()]
    };
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let cross = |a: [f64; 3], b: [f64; 3]| {
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    };
    let mut pts: Vec<[f64; 3]> = ring.iter().map(|&p| v(p)).collect();
    if pts.len() > 1 && ring.first() == ring.last() {
        pts.pop();
    }
    let a = pts[0];
    let mut sum = 0.0;
    for w in pts[1..].windows(2) {
        let (b, c) = (w[0], w[1]);
        let num = dot(a, cross(b, c));
        let den = 1.0 + dot(a, b) + dot(b, c) + dot(c, a);
        sum += 2.0 * num.atan2(den);
    }
    R_AUTH * R_AUTH * sum.abs()
}
