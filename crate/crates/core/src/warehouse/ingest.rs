use std::collections::BTreeSet;

use super::geojson::{parse_collection, RawCoord};
use super::geometry::{orient_geometry, Geometry, GeometryKind};
use super::{CleanReport, Feature, Rejection, Warehouse, WarehouseError};
use crate::geo::{datum_transform, AffineTransform, DatumShift, Ellipsoid, GeoError, GeoPoint, ProjectedPoint, SourceCrs};

/// Transform chain for one source file: optional affine, then inverse
/// projection when the source is projected, then the datum shift to WGS84.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestOptions {
    pub crs: SourceCrs,
    pub shift: Option<DatumShift>,
    pub affine: Option<AffineTransform>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            crs: SourceCrs::Geographic(Ellipsoid::WGS84),
            shift: None,
            affine: None,
        }
    }
}

impl IngestOptions {
    pub fn geographic() -> Self {
        Self::default()
    }

    pub fn projected(spec: crate::geo::ProjectionSpec) -> Self {
        IngestOptions {
            crs: SourceCrs::Projected(spec),
            ..Self::default()
        }
    }

    pub fn describe(&self) -> String {
        let mut s = format!("crs {}", self.crs);
        if let Some(d) = &self.shift {
            s.push_str(&format!(", {d}"));
        }
        if let Some(a) = &self.affine {
            s.push_str(&format!(", {a}"));
        }
        s
    }
}

fn compatible(layer: GeometryKind, found: GeometryKind) -> bool {
    layer == found || (layer == GeometryKind::MultiPolygon && found == GeometryKind::Polygon)
}

pub(super) fn ingest(
    w: &mut Warehouse,
    layer: &str,
    text: &str,
    opts: &IngestOptions,
) -> Result<CleanReport, WarehouseError> {
    let spec = w.layer(layer)?.spec.clone();
    if spec.geometry_kind == GeometryKind::Image {
        return Err(WarehouseError::RasterLayer(spec.name));
    }
    let raw = parse_collection(text)?;
    for f in &raw {
        if let Some(g) = &f.geometry {
            if !compatible(spec.geometry_kind, g.kind()) {
                return Err(WarehouseError::KindMismatch {
                    layer: spec.name.clone(),
                    id: f.id,
                    expected: spec.geometry_kind,
                    found: f.geometry_type.clone(),
                });
            }
        }
    }

    let projector = match &opts.crs {
        SourceCrs::Projected(p) => Some(p.projector()),
        SourceCrs::Geographic(_) => None,
    };
    let ellipsoid = opts.crs.ellipsoid();
    let shift = opts.shift.unwrap_or_default();
    let needs_datum = !(ellipsoid == Ellipsoid::WGS84 && shift.is_zero());
    let transform = |c: &RawCoord| -> Result<GeoPoint, GeoError> {
        let (mut x, mut y) = (c.0, c.1);
        if let Some(a) = &opts.affine {
            let p = a.apply(&ProjectedPoint::new(x, y)?)?;
            (x, y) = (p.x(), p.y());
        }
        let mut g = match &projector {
            Some(pr) => {
                let g = pr.inverse(&ProjectedPoint::new(x, y)?)?;
                GeoPoint::with_height(g.lon(), g.lat(), c.2)?
            }
            None => GeoPoint::with_height(x, y, c.2)?,
        };
        if needs_datum {
            g = datum_transform(&ellipsoid, &shift, &g)?;
        }
        Ok(g)
    };

    let mut report = CleanReport::default();
    let mut taken: BTreeSet<u64> = w.layer(layer)?.features.keys().copied().collect();
    let mut staged = Vec::new();
    for f in raw {
        let reject = |reason: String| Rejection { id: f.id, reason };
        if !taken.insert(f.id) {
            report.rejected.push(reject("duplicate feature id".into()));
            continue;
        }
        let Some(geometry) = &f.geometry else {
            report.rejected.push(reject("missing geometry".into()));
            continue;
        };
        let (attributes, dropped) = match spec.coerce(&f.properties) {
            Ok(v) => v,
            Err(why) => {
                report.rejected.push(reject(why));
                continue;
            }
        };
        let mut geometry = match geometry.try_map(transform) {
            Ok(g) => g,
            Err(e) => {
                report.rejected.push(reject(format!("coordinate conversion failed: {e}")));
                continue;
            }
        };
        if spec.geometry_kind == GeometryKind::MultiPolygon {
            if let Geometry::Polygon(rings) = geometry {
                geometry = Geometry::MultiPolygon(vec![rings]);
            }
        }
        report.rings_reoriented += orient_geometry(&mut geometry);
        report.attributes_dropped += dropped;
        staged.push(Feature {
            id: f.id,
            geometry,
            attributes,
        });
    }

    report.features_stored = staged.len();
    let target = w.layer_mut(layer)?;
    for f in staged {
        target.features.insert(f.id, f);
    }
    if report.features_stored > 0 {
        w.touch();
    }
    Ok(report)
}
