use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::geometry::{signed_area2, unwrapped, Geometry, GeometryKind};
use super::{Feature, Warehouse};
use crate::geo::GeoPoint;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckFailure {
    pub layer: String,
    /// `None` for layer-level failures.
    pub id: Option<u64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub failures: Vec<CheckFailure>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failure_count(&self) -> usize {
        self.checks.iter().map(|c| c.failures.len()).sum()
    }
}

pub const CHECKS: [&str; 10] = [
    "layer_specs",
    "geometry_kind",
    "lon_domain",
    "lat_range",
    "ring_closure",
    "ring_vertices",
    "winding",
    "polyline_vertices",
    "consecutive_duplicates",
    "schema",
];

struct Collector {
    failures: Vec<Vec<CheckFailure>>,
}

impl Collector {
    fn fail(&mut self, check: &str, layer: &str, id: Option<u64>, detail: String) {
        let i = CHECKS.iter().position(|c| *c == check).expect("known check");
        self.failures[i].push(CheckFailure {
            layer: layer.to_string(),
            id,
            detail,
        });
    }
}

fn check_rings(c: &mut Collector, layer: &str, f: &Feature, rings: &[Vec<GeoPoint>]) {
    let id = Some(f.id);
    for (i, ring) in rings.iter().enumerate() {
        let what = if i == 0 { "outer ring".to_string() } else { format!("hole {i}") };
        if ring.first() != ring.last() {
            c.fail("ring_closure", layer, id, format!("{what} is open"));
        }
        if ring.len() < 4 {
            c.fail("ring_vertices", layer, id, format!("{what} has {} vertices", ring.len()));
            continue;
        }
        let a = signed_area2(&unwrapped(ring));
        if (i == 0 && a <= 0.0) || (i > 0 && a >= 0.0) {
            c.fail("winding", layer, id, format!("{what} has signed area {a:e}"));
        }
    }
}

fn check_feature(c: &mut Collector, layer: &super::Layer, f: &Feature) {
    let name = layer.name();
    let id = Some(f.id);
    if f.geometry.kind() != layer.spec.geometry_kind {
        c.fail(
            "geometry_kind",
            name,
            id,
            format!("{} in a {} layer", f.geometry.kind().as_str(), layer.spec.geometry_kind.as_str()),
        );
    }
    let mut bad_lon = None;
    let mut bad_lat = None;
    f.geometry.for_each_vertex(|p| {
        if !(p.lon().is_finite() && (0.0..360.0).contains(&p.lon())) {
            bad_lon.get_or_insert(p.lon());
        }
        if !(p.lat().is_finite() && (-90.0..=90.0).contains(&p.lat()) && p.h().is_finite()) {
            bad_lat.get_or_insert(p.lat());
        }
    });
    if let Some(lon) = bad_lon {
        c.fail("lon_domain", name, id, format!("longitude {lon} outside [0, 360)"));
    }
    if let Some(lat) = bad_lat {
        c.fail("lat_range", name, id, format!("latitude {lat} outside [-90, 90]"));
    }
    match &f.geometry {
        Geometry::Point(_) => {}
        Geometry::PolyLine(v) => {
            if v.len() < 2 {
                c.fail("polyline_vertices", name, id, format!("{} vertices", v.len()));
            }
        }
        Geometry::Polygon(rings) => check_rings(c, name, f, rings),
        Geometry::MultiPolygon(polys) => polys.iter().for_each(|r| check_rings(c, name, f, r)),
    }
    let mut dupes = 0;
    let mut g = f.geometry.clone();
    for part in g.parts_mut() {
        dupes += part.windows(2).filter(|w| w[0].lon() == w[1].lon() && w[0].lat() == w[1].lat()).count();
    }
    if dupes > 0 {
        c.fail("consecutive_duplicates", name, id, format!("{dupes} repeated vertices"));
    }
    if let Err(why) = layer.spec.check_attributes(&f.attributes) {
        c.fail("schema", name, id, why);
    }
}

/// Checks every warehouse invariant and reports failures per check.
pub(super) fn validate(w: &Warehouse) -> ValidationReport {
    let mut c = Collector {
        failures: vec![Vec::new(); CHECKS.len()],
    };
    let mut names = BTreeSet::new();
    for layer in w.layers() {
        if !names.insert(layer.name()) {
            c.fail("layer_specs", layer.name(), None, "duplicate layer name".into());
        }
        if let Err(e) = layer.spec.validate() {
            c.fail("layer_specs", layer.name(), None, e.to_string());
        }
        if layer.spec.geometry_kind == GeometryKind::Image && !layer.is_empty() {
            c.fail("geometry_kind", layer.name(), None, "raster layer holds features".into());
        }
        for f in layer.features() {
            check_feature(&mut c, layer, f);
        }
    }
    ValidationReport {
        checks: CHECKS
            .iter()
            .zip(c.failures)
            .map(|(name, failures)| Check {
                name: name.to_string(),
                passed: failures.is_empty(),
                failures,
            })
            .collect(),
    }
}
