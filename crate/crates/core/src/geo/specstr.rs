//! Textual encodings of projection, datum-shift and affine parameters.
//!
//! ```text
//! tm:cm=<deg>,lat0=<deg>,k=<f>,fe=<m>,fn=<m>,ell=<name>
//! eqc:cm=<deg>,lat0=<deg>,k=<f>,fe=<m>,fn=<m>,ell=<name>
//! utm:<zone>[n|s]
//! shift:dx,dy,dz[,rx,ry,rz,ds]
//! affine:a,b,c,d,e,f
//! geographic[:ell=<name>]
//! ```
//!
//! Ellipsoids are given by name (`wgs84`, `intl1924`, ...) or as
//! `<a>/<inverse flattening>`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AffineTransform, DatumShift, Ellipsoid, GeoError, ProjectionKind, ProjectionSpec};

fn parse_err(kind: &'static str, input: &str, reason: impl Into<String>) -> GeoError {
    GeoError::Parse {
        kind,
        input: input.to_string(),
        reason: reason.into(),
    }
}

fn parse_number(kind: &'static str, input: &str, s: &str) -> Result<f64, GeoError> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| parse_err(kind, input, format!("'{s}' is not a number")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(parse_err(kind, input, format!("'{s}' is not finite")))
    }
}

fn parse_ellipsoid(kind: &'static str, input: &str, s: &str) -> Result<Ellipsoid, GeoError> {
    if let Some(e) = Ellipsoid::named(s) {
        return Ok(e);
    }
    match s.split_once('/') {
        Some((a, inv_f)) => Ellipsoid::new(
            parse_number(kind, input, a)?,
            parse_number(kind, input, inv_f)?,
        ),
        None => Err(parse_err(kind, input, format!("unknown ellipsoid '{s}'"))),
    }
}

fn fmt_ellipsoid(e: &Ellipsoid) -> String {
    match e.name() {
        Some(n) => n.to_string(),
        None => format!("{}/{}", e.a(), e.inv_f()),
    }
}

fn strip_prefix<'a>(kind: &'static str, input: &'a str, prefix: &str) -> Result<&'a str, GeoError> {
    input
        .trim()
        .strip_prefix(prefix)
        .ok_or_else(|| parse_err(kind, input, format!("expected prefix '{prefix}'")))
}

fn number_list(kind: &'static str, input: &str, body: &str) -> Result<Vec<f64>, GeoError> {
    body.split(',')
        .map(|s| parse_number(kind, input, s))
        .collect()
}

impl FromStr for ProjectionSpec {
    type Err = GeoError;

    fn from_str(input: &str) -> Result<Self, GeoError> {
        const KIND: &str = "projection";
        let trimmed = input.trim();
        if let Some(zone) = trimmed.strip_prefix("utm:") {
            let zone = zone.trim().to_ascii_lowercase();
            let (digits, south) = match zone.strip_suffix('s') {
                Some(d) => (d, true),
                None => (zone.strip_suffix('n').unwrap_or(&zone), false),
            };
            let z: u8 = digits
                .parse()
                .map_err(|_| parse_err(KIND, input, "bad UTM zone"))?;
            return ProjectionSpec::utm(z, south);
        }
        let (kind, body) = if let Some(b) = trimmed.strip_prefix("tm:") {
            (ProjectionKind::TransverseMercator, b)
        } else if let Some(b) = trimmed.strip_prefix("eqc:") {
            (ProjectionKind::Equirectangular, b)
        } else {
            return Err(parse_err(KIND, input, "expected 'tm:', 'eqc:' or 'utm:'"));
        };
        let mut cm = None;
        let (mut lat0, mut k, mut fe, mut fnorth) = (0.0, 1.0, 0.0, 0.0);
        let mut ell = Ellipsoid::WGS84;
        for item in body.split(',').filter(|s| !s.trim().is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| parse_err(KIND, input, format!("'{item}' is not key=value")))?;
            match key.trim() {
                "cm" => cm = Some(parse_number(KIND, input, value)?),
                "lat0" => lat0 = parse_number(KIND, input, value)?,
                "k" => k = parse_number(KIND, input, value)?,
                "fe" => fe = parse_number(KIND, input, value)?,
                "fn" => fnorth = parse_number(KIND, input, value)?,
                "ell" => ell = parse_ellipsoid(KIND, input, value.trim())?,
                other => return Err(parse_err(KIND, input, format!("unknown key '{other}'"))),
            }
        }
        let cm = cm.ok_or_else(|| parse_err(KIND, input, "missing 'cm'"))?;
        ProjectionSpec::new(kind, cm, lat0, k, fe, fnorth, ell)
    }
}

impl fmt::Display for ProjectionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.kind() {
            ProjectionKind::TransverseMercator => "tm",
            ProjectionKind::Equirectangular => "eqc",
        };
        write!(
            f,
            "{prefix}:cm={},lat0={},k={},fe={},fn={},ell={}",
            self.central_meridian(),
            self.lat_origin(),
            self.scale_factor(),
            self.false_easting(),
            self.false_northing(),
            fmt_ellipsoid(&self.ellipsoid())
        )
    }
}

impl FromStr for DatumShift {
    type Err = GeoError;

    fn from_str(input: &str) -> Result<Self, GeoError> {
        const KIND: &str = "shift";
        let v = number_list(KIND, input, strip_prefix(KIND, input, "shift:")?)?;
        match v.len() {
            3 => DatumShift::translation(v[0], v[1], v[2]),
            7 => DatumShift::seven(v[0], v[1], v[2], v[3], v[4], v[5], v[6]),
            n => Err(parse_err(KIND, input, format!("expected 3 or 7 values, got {n}"))),
        }
    }
}

impl fmt::Display for DatumShift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "shift:{},{},{}", self.dx, self.dy, self.dz)?;
        if self.has_rotation_or_scale() {
            write!(f, ",{},{},{},{}", self.rx, self.ry, self.rz, self.ds)?;
        }
        Ok(())
    }
}

impl FromStr for AffineTransform {
    type Err = GeoError;

    fn from_str(input: &str) -> Result<Self, GeoError> {
        const KIND: &str = "affine";
        let v = number_list(KIND, input, strip_prefix(KIND, input, "affine:")?)?;
        if v.len() != 6 {
            return Err(parse_err(KIND, input, format!("expected 6 values, got {}", v.len())));
        }
        AffineTransform::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }
}

impl fmt::Display for AffineTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d, e, g] = self.coefficients();
        write!(f, "affine:{a},{b},{c},{d},{e},{g}")
    }
}

/// Coordinate reference system of a source file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SourceCrs {
    /// Longitude/latitude on the given ellipsoid.
    Geographic(Ellipsoid),
    Projected(ProjectionSpec),
}

impl SourceCrs {
    pub fn ellipsoid(&self) -> Ellipsoid {
        match self {
            SourceCrs::Geographic(e) => *e,
            SourceCrs::Projected(p) => p.ellipsoid(),
        }
    }
}

impl FromStr for SourceCrs {
    type Err = GeoError;

    fn from_str(input: &str) -> Result<Self, GeoError> {
        const KIND: &str = "crs";
        let t = input.trim();
        if t == "geographic" || t == "wgs84" {
            return Ok(SourceCrs::Geographic(Ellipsoid::WGS84));
        }
        if let Some(rest) = t.strip_prefix("geographic:") {
            let name = rest
                .trim()
                .strip_prefix("ell=")
                .ok_or_else(|| parse_err(KIND, input, "expected 'geographic:ell=<name>'"))?;
            return Ok(SourceCrs::Geographic(parse_ellipsoid(KIND, input, name)?));
        }
        Ok(SourceCrs::Projected(t.parse()?))
    }
}

impl TryFrom<String> for SourceCrs {
    type Error = GeoError;
    fn try_from(s: String) -> Result<Self, GeoError> {
        s.parse()
    }
}

impl From<SourceCrs> for String {
    fn from(c: SourceCrs) -> String {
        c.to_string()
    }
}

impl fmt::Display for SourceCrs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceCrs::Geographic(e) if *e == Ellipsoid::WGS84 => write!(f, "geographic"),
            SourceCrs::Geographic(e) => write!(f, "geographic:ell={}", fmt_ellipsoid(e)),
            SourceCrs::Projected(p) => write!(f, "{p}"),
        }
    }
}
