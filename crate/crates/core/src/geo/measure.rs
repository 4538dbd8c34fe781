//! Distance and area on the authalic sphere.
//!
//! Measurement uses a sphere of radius [`AUTHALIC_RADIUS_M`]; the error
//! against the ellipsoid is below 0.5 %, adequate for an interactive ruler.

use std::f64::consts::PI;

use super::{delta_lon, GeoError, GeoPoint};
use crate::tolerances::AUTHALIC_RADIUS_M;

/// Haversine distance in meters.
pub fn great_circle_distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    // Fixed argument order keeps the result bitwise symmetric.
    let (a, b) = if (a.lon(), a.lat()) <= (b.lon(), b.lat()) { (a, b) } else { (b, a) };
    let (phi1, phi2) = (a.lat().to_radians(), b.lat().to_radians());
    let dphi = phi2 - phi1;
    let dlam = delta_lon(b.lon(), a.lon()).to_radians();
    let s1 = (dphi / 2.0).sin();
    let s2 = (dlam / 2.0).sin();
    let h = s1 * s1 + phi1.cos() * phi2.cos() * s2 * s2;
    2.0 * AUTHALIC_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Sum of great-circle legs along a path; zero for fewer than two points.
pub fn path_length(path: &[GeoPoint]) -> f64 {
    path.windows(2).map(|w| great_circle_distance(&w[0], &w[1])).sum()
}

/// Area in square meters enclosed by a closed ring of great-circle edges.
///
/// Sums the signed excess of the trapezoid between each edge and the
/// equator; the result is independent of ring orientation.
pub fn geodesic_area(ring: &[GeoPoint]) -> Result<f64, GeoError> {
    if ring.len() < 4 || ring.first() != ring.last() {
        return Err(GeoError::OpenRing);
    }
    let mut excess = 0.0;
    for w in ring.windows(2) {
        let dlam = delta_lon(w[1].lon(), w[0].lon()).to_radians();
        let t1 = (w[0].lat().to_radians() / 2.0).tan();
        let t2 = (w[1].lat().to_radians() / 2.0).tan();
        excess += 2.0 * ((dlam / 2.0).tan() * (t1 + t2)).atan2(1.0 + t1 * t2);
    }
    // Reduce into (-2π, 2π] so a ring and its reverse give the same area.
    let mut e = excess.rem_euclid(4.0 * PI);
    if e > 2.0 * PI {
        e -= 4.0 * PI;
    }
    Ok(e.abs() * AUTHALIC_RADIUS_M * AUTHALIC_RADIUS_M)
}
