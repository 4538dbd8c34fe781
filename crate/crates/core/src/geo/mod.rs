//! Coordinate systems, projections, datum transformations and measurement.
//!
//! Geographic coordinates are stored with longitudes in `[0, 360)` so that
//! archipelagos straddling the 180th meridian stay contiguous. Inputs in
//! `[-180, 180]` are normalized at construction.

mod affine;
mod datum;
mod measure;
mod simplify;
mod specstr;
mod tmerc;

pub use affine::{apply_affine, fit_affine, AffineFit, AffineTransform, ControlPointPair};
pub use datum::{
    datum_transform, geocentric_to_geodetic, geodetic_to_geocentric, helmert_shift, DatumShift,
    Geocentric,
};
pub use measure::{geodesic_area, great_circle_distance, path_length};
pub use simplify::{perpendicular_distance, simplify};
pub use specstr::SourceCrs;
pub use tmerc::{tm_forward, tm_inverse, ProjectionKind, ProjectionSpec, Projector};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("non-finite coordinate value")]
    NonFinite,
    #[error("latitude {0} outside [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("point is {delta:.4} degrees from the central meridian (limit {limit})")]
    OutsideZone { delta: f64, limit: f64 },
    #[error("invalid ellipsoid: {0}")]
    InvalidEllipsoid(String),
    #[error("invalid projection: {0}")]
    InvalidProjection(String),
    #[error("affine transform is not invertible")]
    Singular,
    #[error("at least 3 control point pairs are required, got {0}")]
    TooFewControlPoints(usize),
    #[error("control point sources are collinear")]
    CollinearControlPoints,
    #[error("ring must be closed and have at least 4 vertices")]
    OpenRing,
    #[error("cannot parse {kind} spec '{input}': {reason}")]
    Parse {
        kind: &'static str,
        input: String,
        reason: String,
    },
}

/// Wraps a longitude into `[0, 360)`.
///
/// The result is congruent to `lon` modulo 360 and the function is
/// idempotent. Fails only on NaN or infinite input.
pub fn normalize_longitude(lon: f64) -> Result<f64, GeoError> {
    if !lon.is_finite() {
        return Err(GeoError::NonFinite);
    }
    let r = lon.rem_euclid(360.0);
    // rem_euclid rounds tiny negative inputs up to exactly 360; -0.0 stays signed
    if r >= 360.0 || r == 0.0 {
        Ok(0.0)
    } else {
        Ok(r)
    }
}

/// Signed longitude difference `lon - origin` wrapped into `[-180, 180)`.
pub fn delta_lon(lon: f64, origin: f64) -> f64 {
    let d = (lon - origin).rem_euclid(360.0);
    if d >= 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// Sine and cosine of an angle in degrees, exact at multiples of 90.
pub(crate) fn sincos_deg(deg: f64) -> (f64, f64) {
    let r = deg.rem_euclid(360.0);
    let q = (r / 90.0).round();
    let rem = (r - 90.0 * q).to_radians();
    let (s, c) = rem.sin_cos();
    match (q as i64).rem_euclid(4) {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

/// A geographic position on WGS84 with longitude in `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeoPoint", into = "RawGeoPoint")]
pub struct GeoPoint {
    lon: f64,
    lat: f64,
    h: f64,
}

#[derive(Serialize, Deserialize)]
struct RawGeoPoint {
    lon: f64,
    lat: f64,
    #[serde(default)]
    h: f64,
}

impl TryFrom<RawGeoPoint> for GeoPoint {
    type Error = GeoError;
    fn try_from(r: RawGeoPoint) -> Result<Self, GeoError> {
        GeoPoint::with_height(r.lon, r.lat, r.h)
    }
}

impl From<GeoPoint> for RawGeoPoint {
    fn from(p: GeoPoint) -> Self {
        RawGeoPoint {
            lon: p.lon,
            lat: p.lat,
            h: p.h,
        }
    }
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Result<Self, GeoError> {
        Self::with_height(lon, lat, 0.0)
    }

    pub fn with_height(lon: f64, lat: f64, h: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !h.is_finite() {
            return Err(GeoError::NonFinite);
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::LatitudeOutOfRange(lat));
        }
        Ok(GeoPoint {
            lon: normalize_longitude(lon)?,
            lat,
            h,
        })
    }

    /// Builds a point without normalization or range checks. Only used when
    /// loading stored data so that `validate` can report corruption.
    pub(crate) fn from_raw(lon: f64, lat: f64, h: f64) -> Self {
        GeoPoint { lon, lat, h }
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Checks the type invariants; only fails for points built with
    /// [`GeoPoint::from_raw`].
    pub fn is_valid(&self) -> bool {
        self.lon.is_finite()
            && (0.0..360.0).contains(&self.lon)
            && (-90.0..=90.0).contains(&self.lat)
            && self.h.is_finite()
    }
}

/// A planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct ProjectedPoint {
    x: f64,
    y: f64,
}

impl TryFrom<(f64, f64)> for ProjectedPoint {
    type Error = GeoError;
    fn try_from((x, y): (f64, f64)) -> Result<Self, GeoError> {
        ProjectedPoint::new(x, y)
    }
}

impl From<ProjectedPoint> for (f64, f64) {
    fn from(p: ProjectedPoint) -> Self {
        (p.x, p.y)
    }
}

impl ProjectedPoint {
    pub fn new(x: f64, y: f64) -> Result<Self, GeoError> {
        if x.is_finite() && y.is_finite() {
            Ok(ProjectedPoint { x, y })
        } else {
            Err(GeoError::NonFinite)
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn distance(&self, other: &ProjectedPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A reference ellipsoid given by semi-major axis and inverse flattening.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    a: f64,
    inv_f: f64,
}

impl Ellipsoid {
    pub const WGS84: Ellipsoid = Ellipsoid {
        a: 6_378_137.0,
        inv_f: 298.257_223_563,
    };
    pub const GRS80: Ellipsoid = Ellipsoid {
        a: 6_378_137.0,
        inv_f: 298.257_222_101,
    };
    pub const INTERNATIONAL_1924: Ellipsoid = Ellipsoid {
        a: 6_378_388.0,
        inv_f: 297.0,
    };
    pub const CLARKE_1866: Ellipsoid = Ellipsoid {
        a: 6_378_206.4,
        inv_f: 294.978_698_2,
    };
    pub const CLARKE_1880: Ellipsoid = Ellipsoid {
        a: 6_378_249.145,
        inv_f: 293.465,
    };
    pub const WGS72: Ellipsoid = Ellipsoid {
        a: 6_378_135.0,
        inv_f: 298.26,
    };

    const NAMED: [(&'static str, Ellipsoid); 6] = [
        ("wgs84", Ellipsoid::WGS84),
        ("grs80", Ellipsoid::GRS80),
        ("intl1924", Ellipsoid::INTERNATIONAL_1924),
        ("clarke1866", Ellipsoid::CLARKE_1866),
        ("clarke1880", Ellipsoid::CLARKE_1880),
        ("wgs72", Ellipsoid::WGS72),
    ];

    pub fn new(a: f64, inv_f: f64) -> Result<Self, GeoError> {
        if !(a.is_finite() && a > 0.0) {
            return Err(GeoError::InvalidEllipsoid(format!("semi-major axis {a}")));
        }
        if !(inv_f.is_finite() && inv_f > 1.0) {
            return Err(GeoError::InvalidEllipsoid(format!(
                "inverse flattening {inv_f}"
            )));
        }
        Ok(Ellipsoid { a, inv_f })
    }

    /// Looks up a named ellipsoid (`wgs84`, `grs80`, `intl1924`, ...).
    pub fn named(name: &str) -> Option<Ellipsoid> {
        let name = name.to_ascii_lowercase();
        Self::NAMED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, e)| *e)
    }

    /// Reverse of [`Ellipsoid::named`].
    pub fn name(&self) -> Option<&'static str> {
        Self::NAMED.iter().find(|(_, e)| e == self).map(|(n, _)| *n)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn inv_f(&self) -> f64 {
        self.inv_f
    }

    pub fn f(&self) -> f64 {
        1.0 / self.inv_f
    }

    pub fn b(&self) -> f64 {
        self.a * (1.0 - self.f())
    }

    /// First eccentricity squared.
    pub fn e2(&self) -> f64 {
        let f = self.f();
        f * (2.0 - f)
    }

    /// Third flattening `n = f / (2 - f)`.
    pub fn n(&self) -> f64 {
        let f = self.f();
        f / (2.0 - f)
    }
}
