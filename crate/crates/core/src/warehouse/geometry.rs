use serde::{Deserialize, Serialize};

use crate::geo::{delta_lon, GeoPoint, ProjectedPoint};

/// Anything with planar x/y components.
pub trait Planar: Copy {
    fn xy(&self) -> (f64, f64);
}

impl Planar for GeoPoint {
    fn xy(&self) -> (f64, f64) {
        (self.lon(), self.lat())
    }
}

impl Planar for ProjectedPoint {
    fn xy(&self) -> (f64, f64) {
        (self.x(), self.y())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Point,
    PolyLine,
    Polygon,
    MultiPolygon,
    /// Raster imagery. Layer specs may declare it so catalogs stay complete,
    /// but no features are stored and caches refuse to publish it.
    Image,
}

impl GeometryKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GeometryKind::Point => "point",
            GeometryKind::PolyLine => "poly_line",
            GeometryKind::Polygon => "polygon",
            GeometryKind::MultiPolygon => "multi_polygon",
            GeometryKind::Image => "image",
        }
    }
}

impl std::fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Vector geometry over a coordinate type: [`GeoPoint`] in warehouses,
/// [`ProjectedPoint`] in caches.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry<C> {
    Point(C),
    PolyLine(Vec<C>),
    /// Outer ring first, then holes.
    Polygon(Vec<Vec<C>>),
    MultiPolygon(Vec<Vec<Vec<C>>>),
}

impl<C: Copy> Geometry<C> {
    pub fn kind(&self) -> GeometryKind {
        match self {
            Geometry::Point(_) => GeometryKind::Point,
            Geometry::PolyLine(_) => GeometryKind::PolyLine,
            Geometry::Polygon(_) => GeometryKind::Polygon,
            Geometry::MultiPolygon(_) => GeometryKind::MultiPolygon,
        }
    }

    pub fn try_map<D, E>(&self, mut f: impl FnMut(&C) -> Result<D, E>) -> Result<Geometry<D>, E> {
        let mut line = |v: &Vec<C>| v.iter().map(&mut f).collect::<Result<Vec<D>, E>>();
        Ok(match self {
            Geometry::Point(c) => Geometry::Point(f(c)?),
            Geometry::PolyLine(v) => Geometry::PolyLine(line(v)?),
            Geometry::Polygon(rings) => Geometry::Polygon(rings.iter().map(&mut line).collect::<Result<_, E>>()?),
            Geometry::MultiPolygon(polys) => Geometry::MultiPolygon(
                polys
                    .iter()
                    .map(|p| p.iter().map(&mut line).collect::<Result<Vec<_>, E>>())
                    .collect::<Result<_, E>>()?,
            ),
        })
    }

    pub fn for_each_vertex(&self, mut f: impl FnMut(&C)) {
        match self {
            Geometry::Point(c) => f(c),
            Geometry::PolyLine(v) => v.iter().for_each(f),
            Geometry::Polygon(rings) => rings.iter().flatten().for_each(f),
            Geometry::MultiPolygon(polys) => polys.iter().flatten().flatten().for_each(f),
        }
    }

    pub fn vertex_count(&self) -> usize {
        let mut n = 0;
        self.for_each_vertex(|_| n += 1);
        n
    }

    /// Polygons of this geometry (empty for points and lines).
    pub fn polygons(&self) -> Vec<&Vec<Vec<C>>> {
        match self {
            Geometry::Polygon(p) => vec![p],
            Geometry::MultiPolygon(ps) => ps.iter().collect(),
            _ => Vec::new(),
        }
    }

    /// Every ring and line part, for operations that treat them uniformly.
    pub fn parts_mut(&mut self) -> Vec<&mut Vec<C>> {
        match self {
            Geometry::Point(_) => Vec::new(),
            Geometry::PolyLine(v) => vec![v],
            Geometry::Polygon(rings) => rings.iter_mut().collect(),
            Geometry::MultiPolygon(polys) => polys.iter_mut().flatten().collect(),
        }
    }
}

impl<C: Planar> Geometry<C> {
    /// `[min_x, min_y, max_x, max_y]`
    pub fn bbox(&self) -> [f64; 4] {
        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        self.for_each_vertex(|c| {
            let (x, y) = c.xy();
            b[0] = b[0].min(x);
            b[1] = b[1].min(y);
            b[2] = b[2].max(x);
            b[3] = b[3].max(y);
        });
        b
    }
}

/// Ring vertices as planar `(lon, lat)` with longitudes unwrapped relative
/// to the first vertex, so rings crossing the 0/360 seam stay contiguous.
pub fn unwrapped(ring: &[GeoPoint]) -> Vec<(f64, f64)> {
    let Some(first) = ring.first() else {
        return Vec::new();
    };
    ring.iter()
        .map(|p| (first.lon() + delta_lon(p.lon(), first.lon()), p.lat()))
        .collect()
}

/// Twice the signed shoelace area; positive for counter-clockwise rings.
/// Works for closed and unclosed vertex lists.
pub fn signed_area2(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..pts.len() {
        let (x0, y0) = pts[i];
        let (x1, y1) = pts[(i + 1) % pts.len()];
        s += x0 * y1 - x1 * y0;
    }
    s
}

/// Winds outer rings counter-clockwise and holes clockwise. Returns the
/// number of rings reversed. Degenerate rings are left alone.
pub fn orient_rings(rings: &mut [Vec<GeoPoint>]) -> usize {
    let mut flipped = 0;
    for (i, ring) in rings.iter_mut().enumerate() {
        let a = signed_area2(&unwrapped(ring));
        let want_ccw = i == 0;
        if (want_ccw && a < 0.0) || (!want_ccw && a > 0.0) {
            ring.reverse();
            flipped += 1;
        }
    }
    flipped
}

/// Applies [`orient_rings`] to every polygon of `g`.
pub fn orient_geometry(g: &mut Geometry<GeoPoint>) -> usize {
    match g {
        Geometry::Polygon(rings) => orient_rings(rings),
        Geometry::MultiPolygon(polys) => polys.iter_mut().map(|p| orient_rings(p)).sum(),
        _ => 0,
    }
}

/// Planar distance between geographic points in degrees, seam-aware.
pub fn degree_distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    delta_lon(b.lon(), a.lon()).hypot(b.lat() - a.lat())
}
