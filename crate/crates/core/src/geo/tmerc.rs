//! Transverse Mercator (Krüger n-series, 6th order) and the equirectangular
//! fallback used for region-wide caches.

use serde::{Deserialize, Serialize};

use super::{delta_lon, normalize_longitude, Ellipsoid, GeoError, GeoPoint, ProjectedPoint};
use crate::tolerances::TM_MAX_DELTA_LON_DEG;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionKind {
    TransverseMercator,
    /// Plate carrée centered on `central_meridian`; `lat_origin` is the
    /// parallel of true scale. Valid over the whole globe, used for
    /// region-scale caches that exceed one TM zone.
    Equirectangular,
}

/// Parameters of a planar projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    kind: ProjectionKind,
    central_meridian: f64,
    lat_origin: f64,
    scale_factor: f64,
    false_easting: f64,
    false_northing: f64,
    ellipsoid: Ellipsoid,
}

impl ProjectionSpec {
    pub fn new(
        kind: ProjectionKind,
        central_meridian: f64,
        lat_origin: f64,
        scale_factor: f64,
        false_easting: f64,
        false_northing: f64,
        ellipsoid: Ellipsoid,
    ) -> Result<Self, GeoError> {
        if !(scale_factor > 0.9 && scale_factor <= 1.1) {
            return Err(GeoError::InvalidProjection(format!(
                "scale factor {scale_factor} outside (0.9, 1.1]"
            )));
        }
        if !(lat_origin.is_finite() && (-90.0..=90.0).contains(&lat_origin)) {
            return Err(GeoError::InvalidProjection(format!(
                "origin latitude {lat_origin}"
            )));
        }
        if kind == ProjectionKind::Equirectangular && lat_origin.abs() >= 90.0 {
            return Err(GeoError::InvalidProjection(
                "equirectangular true-scale parallel must be below 90".into(),
            ));
        }
        if !(false_easting.is_finite() && false_northing.is_finite()) {
            return Err(GeoError::NonFinite);
        }
        Ok(ProjectionSpec {
            kind,
            central_meridian: normalize_longitude(central_meridian)?,
            lat_origin,
            scale_factor,
            false_easting,
            false_northing,
            ellipsoid,
        })
    }

    /// Transverse Mercator with the given parameters.
    pub fn transverse_mercator(
        central_meridian: f64,
        lat_origin: f64,
        scale_factor: f64,
        false_easting: f64,
        false_northing: f64,
        ellipsoid: Ellipsoid,
    ) -> Result<Self, GeoError> {
        Self::new(
            ProjectionKind::TransverseMercator,
            central_meridian,
            lat_origin,
            scale_factor,
            false_easting,
            false_northing,
            ellipsoid,
        )
    }

    /// UTM zone `1..=60` on WGS84.
    pub fn utm(zone: u8, south: bool) -> Result<Self, GeoError> {
        if !(1..=60).contains(&zone) {
            return Err(GeoError::InvalidProjection(format!("UTM zone {zone}")));
        }
        let cm = -183.0 + 6.0 * f64::from(zone);
        let false_northing = if south { 10_000_000.0 } else { 0.0 };
        Self::transverse_mercator(cm, 0.0, 0.9996, 500_000.0, false_northing, Ellipsoid::WGS84)
    }

    pub fn kind(&self) -> ProjectionKind {
        self.kind
    }
    pub fn central_meridian(&self) -> f64 {
        self.central_meridian
    }
    pub fn lat_origin(&self) -> f64 {
        self.lat_origin
    }
    pub fn scale_factor(&self) -> f64 {
        self.scale_factor
    }
    pub fn false_easting(&self) -> f64 {
        self.false_easting
    }
    pub fn false_northing(&self) -> f64 {
        self.false_northing
    }
    pub fn ellipsoid(&self) -> Ellipsoid {
        self.ellipsoid
    }

    pub fn projector(&self) -> Projector {
        Projector::new(*self)
    }
}

/// Forward transverse Mercator projection of a single point.
pub fn tm_forward(spec: &ProjectionSpec, p: &GeoPoint) -> Result<ProjectedPoint, GeoError> {
    spec.projector().forward(p)
}

/// Inverse transverse Mercator projection of a single point.
pub fn tm_inverse(spec: &ProjectionSpec, p: &ProjectedPoint) -> Result<GeoPoint, GeoError> {
    spec.projector().inverse(p)
}

/// A projection with its series coefficients precomputed, for projecting
/// many vertices.
#[derive(Debug, Clone)]
pub struct Projector {
    spec: ProjectionSpec,
    e: f64,
    e2: f64,
    /// Rectifying radius scaled by k0.
    k_a: f64,
    alpha: [f64; 6],
    beta: [f64; 6],
    /// Rectifying (TM) or parallel (equirectangular) origin term.
    xi0: f64,
}

fn horner(coeffs: &[f64], n: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * n + c)
}

impl Projector {
    pub fn new(spec: ProjectionSpec) -> Self {
        let ell = spec.ellipsoid;
        let n = ell.n();
        let e2 = ell.e2();
        let e = e2.sqrt();
        // Coefficients as polynomials in n, lowest power first.
        let alpha = [
            n * horner(&[1.0 / 2.0, -2.0 / 3.0, 5.0 / 16.0, 41.0 / 180.0, -127.0 / 288.0, 7891.0 / 37800.0], n),
            n * n * horner(&[13.0 / 48.0, -3.0 / 5.0, 557.0 / 1440.0, 281.0 / 630.0, -1983433.0 / 1935360.0], n),
            n.powi(3) * horner(&[61.0 / 240.0, -103.0 / 140.0, 15061.0 / 26880.0, 167603.0 / 181440.0], n),
            n.powi(4) * horner(&[49561.0 / 161280.0, -179.0 / 168.0, 6601661.0 / 7257600.0], n),
            n.powi(5) * horner(&[34729.0 / 80640.0, -3418889.0 / 1995840.0], n),
            n.powi(6) * (212378941.0 / 319334400.0),
        ];
        let beta = [
            n * horner(&[1.0 / 2.0, -2.0 / 3.0, 37.0 / 96.0, -1.0 / 360.0, -81.0 / 512.0, 96199.0 / 604800.0], n),
            n * n * horner(&[1.0 / 48.0, 1.0 / 15.0, -437.0 / 1440.0, 46.0 / 105.0, -1118711.0 / 3870720.0], n),
            n.powi(3) * horner(&[17.0 / 480.0, -37.0 / 840.0, -209.0 / 4480.0, 5569.0 / 90720.0], n),
            n.powi(4) * horner(&[4397.0 / 161280.0, -11.0 / 504.0, -830251.0 / 7257600.0], n),
            n.powi(5) * horner(&[4583.0 / 161280.0, -108847.0 / 3991680.0], n),
            n.powi(6) * (20648693.0 / 638668800.0),
        ];
        let rect = ell.a() / (1.0 + n) * horner(&[1.0, 0.0, 1.0 / 4.0, 0.0, 1.0 / 64.0, 0.0, 1.0 / 256.0], n);
        let mut proj = Projector {
            spec,
            e,
            e2,
            k_a: spec.scale_factor * rect,
            alpha,
            beta,
            xi0: 0.0,
        };
        proj.xi0 = match spec.kind {
            ProjectionKind::TransverseMercator => proj.tm_series(spec.lat_origin.to_radians(), 0.0).0,
            ProjectionKind::Equirectangular => spec.lat_origin.to_radians().cos(),
        };
        proj
    }

    pub fn spec(&self) -> &ProjectionSpec {
        &self.spec
    }

    /// Conformal latitude tangent from geodetic latitude tangent.
    fn taupf(&self, tau: f64) -> f64 {
        let tau1 = tau.hypot(1.0);
        let sig = (self.e * (self.e * tau / tau1).atanh()).sinh();
        tau * sig.hypot(1.0) - sig * tau1
    }

    /// Geodetic latitude tangent from conformal latitude tangent (Newton).
    fn tauf(&self, taup: f64) -> f64 {
        let e2m = 1.0 - self.e2;
        let mut tau = taup / e2m;
        let tol = f64::EPSILON.sqrt() * 1e-3;
        for _ in 0..8 {
            let taupa = self.taupf(tau);
            let dtau = (taup - taupa) * (1.0 + e2m * tau * tau)
                / (e2m * tau.hypot(1.0) * taupa.hypot(1.0));
            tau += dtau;
            if dtau.abs() < tol * tau.abs().max(1.0) {
                break;
            }
        }
        tau
    }

    /// Returns (xi, eta) on the unit rectifying sphere.
    fn tm_series(&self, phi: f64, lam: f64) -> (f64, f64) {
        let (sin_lam, cos_lam) = lam.sin_cos();
        let taup = if phi.abs() >= std::f64::consts::FRAC_PI_2 {
            f64::INFINITY.copysign(phi)
        } else {
            self.taupf(phi.tan())
        };
        let xip = taup.atan2(cos_lam);
        let etap = if taup.is_infinite() {
            0.0
        } else {
            (sin_lam / taup.hypot(cos_lam)).asinh()
        };
        let mut xi = xip;
        let mut eta = etap;
        for (j, a) in self.alpha.iter().enumerate() {
            let k = 2.0 * (j as f64 + 1.0);
            xi += a * (k * xip).sin() * (k * etap).cosh();
            eta += a * (k * xip).cos() * (k * etap).sinh();
        }
        (xi, eta)
    }

    pub fn forward(&self, p: &GeoPoint) -> Result<ProjectedPoint, GeoError> {
        let s = &self.spec;
        let dlon = delta_lon(p.lon(), s.central_meridian);
        match s.kind {
            ProjectionKind::TransverseMercator => {
                if dlon.abs() >= TM_MAX_DELTA_LON_DEG {
                    return Err(GeoError::OutsideZone {
                        delta: dlon,
                        limit: TM_MAX_DELTA_LON_DEG,
                    });
                }
                let (xi, eta) = self.tm_series(p.lat().to_radians(), dlon.to_radians());
                ProjectedPoint::new(
                    s.false_easting + self.k_a * eta,
                    s.false_northing + self.k_a * (xi - self.xi0),
                )
            }
            ProjectionKind::Equirectangular => {
                let k_a = s.scale_factor * s.ellipsoid.a();
                ProjectedPoint::new(
                    s.false_easting + k_a * self.xi0 * dlon.to_radians(),
                    s.false_northing + k_a * p.lat().to_radians(),
                )
            }
        }
    }

    pub fn inverse(&self, p: &ProjectedPoint) -> Result<GeoPoint, GeoError> {
        let s = &self.spec;
        let (lat, dlon) = match s.kind {
            ProjectionKind::TransverseMercator => {
                let xi = (p.y() - s.false_northing) / self.k_a + self.xi0;
                let eta = (p.x() - s.false_easting) / self.k_a;
                let mut xip = xi;
                let mut etap = eta;
                for (j, b) in self.beta.iter().enumerate() {
                    let k = 2.0 * (j as f64 + 1.0);
                    xip -= b * (k * xi).sin() * (k * eta).cosh();
                    etap -= b * (k * xi).cos() * (k * eta).sinh();
                }
                let (sin_xip, cos_xip) = xip.sin_cos();
                let sinh_etap = etap.sinh();
                let lam = sinh_etap.atan2(cos_xip).to_degrees();
                if !lam.is_finite() || lam.abs() >= TM_MAX_DELTA_LON_DEG {
                    return Err(GeoError::OutsideZone {
                        delta: lam,
                        limit: TM_MAX_DELTA_LON_DEG,
                    });
                }
                let taup = sin_xip / sinh_etap.hypot(cos_xip);
                let lat = self.tauf(taup).atan().to_degrees();
                (lat, lam)
            }
            ProjectionKind::Equirectangular => {
                let k_a = s.scale_factor * s.ellipsoid.a();
                let lat = ((p.y() - s.false_northing) / k_a).to_degrees();
                let lam = ((p.x() - s.false_easting) / (k_a * self.xi0)).to_degrees();
                if !(lat.abs() <= 90.0 && lam.abs() < 180.0) {
                    return Err(GeoError::OutsideZone {
                        delta: lam,
                        limit: 180.0,
                    });
                }
                (lat, lam)
            }
        };
        GeoPoint::new(s.central_meridian + dlon, lat.clamp(-90.0, 90.0))
    }
}
