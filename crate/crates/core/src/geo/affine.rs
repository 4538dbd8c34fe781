use serde::{Deserialize, Serialize};

use super::{GeoError, ProjectedPoint};
use crate::tolerances::GCP_COLLINEAR_EIGEN_RATIO;

/// `x' = a·x + b·y + c`, `y' = d·x + e·y + f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    e: f64,
    f: f64,
}

impl AffineTransform {
    pub const IDENTITY: AffineTransform = AffineTransform {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
        e: 1.0,
        f: 0.0,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> Result<Self, GeoError> {
        let t = AffineTransform { a, b, c, d, e, f };
        if !t.coefficients().iter().all(|v| v.is_finite()) {
            return Err(GeoError::NonFinite);
        }
        let det = t.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(GeoError::Singular);
        }
        Ok(t)
    }

    pub fn translation(dx: f64, dy: f64) -> Result<Self, GeoError> {
        Self::new(1.0, 0.0, dx, 0.0, 1.0, dy)
    }

    /// `[a, b, c, d, e, f]`
    pub fn coefficients(&self) -> [f64; 6] {
        [self.a, self.b, self.c, self.d, self.e, self.f]
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.e - self.b * self.d
    }

    pub fn apply(&self, p: &ProjectedPoint) -> Result<ProjectedPoint, GeoError> {
        ProjectedPoint::new(
            self.a * p.x() + self.b * p.y() + self.c,
            self.d * p.x() + self.e * p.y() + self.f,
        )
    }

    pub fn inverse(&self) -> Result<AffineTransform, GeoError> {
        let det = self.determinant();
        let (a, b, d, e) = (self.e / det, -self.b / det, -self.d / det, self.a / det);
        AffineTransform::new(a, b, -(a * self.c + b * self.f), d, e, -(d * self.c + e * self.f))
    }
}

pub fn apply_affine(t: &AffineTransform, p: &ProjectedPoint) -> Result<ProjectedPoint, GeoError> {
    t.apply(p)
}

/// A control point known in a local grid (`source`) and a reference grid
/// (`target`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPointPair {
    pub source: ProjectedPoint,
    pub target: ProjectedPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineFit {
    pub transform: AffineTransform,
    /// Distance between the fitted and the known target, per pair.
    pub residuals: Vec<f64>,
    pub rms: f64,
}

/// Least-squares six-parameter fit of `target ≈ T(source)`.
///
/// Source coordinates are centred before forming the normal equations so
/// the conditioning test is not dominated by large false eastings.
pub fn fit_affine(pairs: &[ControlPointPair]) -> Result<AffineFit, GeoError> {
    let n = pairs.len();
    if n < 3 {
        return Err(GeoError::TooFewControlPoints(n));
    }
    let nf = n as f64;
    let (mut sx, mut sy, mut tx, mut ty) = (0.0, 0.0, 0.0, 0.0);
    for p in pairs {
        sx += p.source.x();
        sy += p.source.y();
        tx += p.target.x();
        ty += p.target.y();
    }
    let (mx, my, mtx, mty) = (sx / nf, sy / nf, tx / nf, ty / nf);

    let (mut suu, mut suv, mut svv) = (0.0, 0.0, 0.0);
    let (mut sux, mut svx, mut suy, mut svy) = (0.0, 0.0, 0.0, 0.0);
    for p in pairs {
        let u = p.source.x() - mx;
        let v = p.source.y() - my;
        let gx = p.target.x() - mtx;
        let gy = p.target.y() - mty;
        suu += u * u;
        suv += u * v;
        svv += v * v;
        sux += u * gx;
        svx += v * gx;
        suy += u * gy;
        svy += v * gy;
    }

    // Centred normal matrix is block diagonal: [[suu, suv], [suv, svv]] ⊕ [n].
    let half_tr = 0.5 * (suu + svv);
    let disc = (0.25 * (suu - svv) * (suu - svv) + suv * suv).sqrt();
    let (lmin, lmax) = (half_tr - disc, half_tr + disc);
    let largest = lmax.max(nf);
    if !(lmin.min(nf) > GCP_COLLINEAR_EIGEN_RATIO * largest) {
        return Err(GeoError::CollinearControlPoints);
    }

    let det = suu * svv - suv * suv;
    let a = (sux * svv - svx * suv) / det;
    let b = (svx * suu - sux * suv) / det;
    let d = (suy * svv - svy * suv) / det;
    let e = (svy * suu - suy * suv) / det;
    let c = mtx - a * mx - b * my;
    let f = mty - d * mx - e * my;
    let transform = AffineTransform::new(a, b, c, d, e, f)?;

    let residuals: Vec<f64> = pairs
        .iter()
        .map(|p| {
            let fitted = transform.apply(&p.source)?;
            Ok(fitted.distance(&p.target))
        })
        .collect::<Result<_, GeoError>>()?;
    let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / nf).sqrt();
    Ok(AffineFit {
        transform,
        residuals,
        rms,
    })
}
