use serde::{Deserialize, Serialize};

use super::{normalize_longitude, sincos_deg, Ellipsoid, GeoError, GeoPoint};

/// Earth-centred Cartesian coordinates in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geocentric {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Seven-parameter Helmert shift to WGS84 (position-vector convention).
///
/// Translations in meters, rotations in arc-seconds, scale in ppm. The
/// three-parameter shift is the special case with zero rotation and scale.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DatumShift {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    #[serde(default)]
    pub rx: f64,
    #[serde(default)]
    pub ry: f64,
    #[serde(default)]
    pub rz: f64,
    #[serde(default)]
    pub ds: f64,
}

impl DatumShift {
    pub fn translation(dx: f64, dy: f64, dz: f64) -> Result<Self, GeoError> {
        Self::seven(dx, dy, dz, 0.0, 0.0, 0.0, 0.0)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn seven(dx: f64, dy: f64, dz: f64, rx: f64, ry: f64, rz: f64, ds: f64) -> Result<Self, GeoError> {
        let s = DatumShift { dx, dy, dz, rx, ry, rz, ds };
        if s.params().iter().all(|v| v.is_finite()) {
            Ok(s)
        } else {
            Err(GeoError::NonFinite)
        }
    }

    pub fn params(&self) -> [f64; 7] {
        [self.dx, self.dy, self.dz, self.rx, self.ry, self.rz, self.ds]
    }

    pub fn is_zero(&self) -> bool {
        self.params().iter().all(|v| *v == 0.0)
    }

    pub fn has_rotation_or_scale(&self) -> bool {
        self.rx != 0.0 || self.ry != 0.0 || self.rz != 0.0 || self.ds != 0.0
    }
}

pub fn geodetic_to_geocentric(e: &Ellipsoid, p: &GeoPoint) -> Geocentric {
    let (sin_phi, cos_phi) = sincos_deg(p.lat());
    let (sin_lam, cos_lam) = sincos_deg(p.lon());
    let e2 = e.e2();
    let n = e.a() / (1.0 - e2 * sin_phi * sin_phi).sqrt();
    let r = (n + p.h()) * cos_phi;
    Geocentric {
        x: r * cos_lam,
        y: r * sin_lam,
        z: (n * (1.0 - e2) + p.h()) * sin_phi,
    }
}

/// Inverse of [`geodetic_to_geocentric`] by fixed-point iteration on latitude.
pub fn geocentric_to_geodetic(e: &Ellipsoid, c: &Geocentric) -> Result<GeoPoint, GeoError> {
    if !(c.x.is_finite() && c.y.is_finite() && c.z.is_finite()) {
        return Err(GeoError::NonFinite);
    }
    let e2 = e.e2();
    let p = c.x.hypot(c.y);
    let lon = if p == 0.0 { 0.0 } else { c.y.atan2(c.x).to_degrees() };
    if p == 0.0 {
        let lat = if c.z >= 0.0 { 90.0 } else { -90.0 };
        return GeoPoint::with_height(lon, lat, c.z.abs() - e.b());
    }
    let mut phi = c.z.atan2(p * (1.0 - e2));
    for _ in 0..16 {
        let s = phi.sin();
        let n = e.a() / (1.0 - e2 * s * s).sqrt();
        let next = (c.z + e2 * n * s).atan2(p);
        let done = (next - phi).abs() < 1e-15;
        phi = next;
        if done {
            break;
        }
    }
    let (s, co) = phi.sin_cos();
    let n = e.a() / (1.0 - e2 * s * s).sqrt();
    let h = p * co + c.z * s - e.a() * e.a() / n;
    GeoPoint::with_height(normalize_longitude(lon)?, phi.to_degrees(), h)
}

pub fn helmert_shift(s: &DatumShift, c: &Geocentric) -> Geocentric {
    const ARCSEC: f64 = std::f64::consts::PI / (180.0 * 3600.0);
    let m = 1.0 + s.ds * 1e-6;
    let (rx, ry, rz) = (s.rx * ARCSEC, s.ry * ARCSEC, s.rz * ARCSEC);
    Geocentric {
        x: s.dx + m * (c.x - rz * c.y + ry * c.z),
        y: s.dy + m * (rz * c.x + c.y - rx * c.z),
        z: s.dz + m * (-ry * c.x + rx * c.y + c.z),
    }
}

/// Moves a point from a source datum (ellipsoid plus shift to WGS84) onto
/// WGS84. The WGS84 / zero-shift case returns the input unchanged.
pub fn datum_transform(src: &Ellipsoid, shift: &DatumShift, p: &GeoPoint) -> Result<GeoPoint, GeoError> {
    if *src == Ellipsoid::WGS84 && shift.is_zero() {
        return Ok(*p);
    }
    let xyz = geodetic_to_geocentric(src, p);
    let shifted = helmert_shift(shift, &xyz);
    geocentric_to_geodetic(&Ellipsoid::WGS84, &shifted)
}
