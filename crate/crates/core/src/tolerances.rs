//! Numeric tolerances and conventions shared across the engine.
//!
//! Every threshold used by the pipeline lives here so operators (and the CLI
//! flags that override them) have one place to look.

/// Mean (authalic) Earth radius used by the measurement tools, in meters.
pub const AUTHALIC_RADIUS_M: f64 = 6_371_008.8;

/// Largest angular distance from the central meridian accepted by the
/// transverse Mercator series, in degrees.
pub const TM_MAX_DELTA_LON_DEG: f64 = 10.0;

/// Relative eigenvalue threshold below which the GCP normal matrix is
/// treated as singular (collinear control points).
pub const GCP_COLLINEAR_EIGEN_RATIO: f64 = 1e-12;

/// Default vertex snapping tolerance for topology cleaning, in degrees
/// (about 0.11 m at the equator).
pub const DEFAULT_SNAP_TOL_DEG: f64 = 1e-6;

/// Default seam tolerance for sheet merging, in degrees.
pub const DEFAULT_SEAM_TOL_DEG: f64 = DEFAULT_SNAP_TOL_DEG;

/// Size of the reference screen pixel in meters, used to convert between
/// scale denominators and pixels.
pub const REFERENCE_PIXEL_M: f64 = 0.00028;

/// Map generalization tolerance per unit of scale denominator, in meters.
/// A map at 1:N is simplified with `N * SIMPLIFY_PER_SCALE_M` meters.
pub const SIMPLIFY_PER_SCALE_M: f64 = 0.0002;

/// Clamp range for effective scale denominators.
pub const MIN_SCALE_DENOM: f64 = 1_000.0;
pub const MAX_SCALE_DENOM: f64 = 10_000_000.0;

/// Accepted map image sizes in pixels (inclusive).
pub const MIN_IMAGE_PX: u32 = 16;
pub const MAX_IMAGE_PX: u32 = 4096;

/// Nominal bandwidth of the satellite link the atlas was budgeted against,
/// in bits per second. Used to report transfer estimates for payloads.
pub const LINK_BANDWIDTH_BPS: f64 = 256_000.0;

/// Default pick tolerance for identify requests, in pixels.
pub const DEFAULT_IDENTIFY_TOL_PX: f64 = 5.0;

/// Converts a pixel distance to ground meters at the given scale.
pub fn pixels_to_meters(px: f64, scale_denom: f64) -> f64 {
    px * REFERENCE_PIXEL_M * scale_denom
}

/// Clamps a scale denominator into the supported range.
pub fn clamp_scale(scale_denom: f64) -> f64 {
    scale_denom.clamp(MIN_SCALE_DENOM, MAX_SCALE_DENOM)
}

/// Generalization tolerance in meters for a map at the given scale.
pub fn simplify_tolerance_m(scale_denom: f64) -> f64 {
    SIMPLIFY_PER_SCALE_M * scale_denom
}
