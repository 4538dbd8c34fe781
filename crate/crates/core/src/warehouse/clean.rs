use std::collections::HashMap;

use super::geometry::{degree_distance, orient_geometry, Geometry};
use super::{CleanReport, Feature, Rejection, Warehouse, WarehouseError};
use crate::geo::GeoPoint;
use crate::tolerances::DEFAULT_SNAP_TOL_DEG;

#[derive(Debug, Clone, PartialEq)]
pub struct CleanOptions {
    /// Degrees; vertices closer than this are treated as one position.
    pub snap_tol: f64,
    /// Layers whose vertices are canonical for snapping, ahead of any
    /// vertex of the cleaned layer. Empty disables cross-layer snapping.
    pub reference_layers: Vec<String>,
}

impl CleanOptions {
    pub fn new(snap_tol: f64) -> Self {
        CleanOptions {
            snap_tol,
            reference_layers: Vec::new(),
        }
    }
}

impl Default for CleanOptions {
    fn default() -> Self {
        Self::new(DEFAULT_SNAP_TOL_DEG)
    }
}

/// Lower sorts first and wins a snap: reference layers, then feature id.
type Priority = (u8, usize, u64);

/// Uniform grid over `[0, 360) × [-90, 90]` with cells of the snap
/// tolerance, wrapping in longitude.
struct SnapGrid {
    cell: f64,
    lon_cells: i64,
    cells: HashMap<(i64, i64), Vec<(Priority, GeoPoint)>>,
}

impl SnapGrid {
    fn new(tol: f64) -> Self {
        SnapGrid {
            cell: tol,
            lon_cells: (360.0 / tol).ceil() as i64,
            cells: HashMap::new(),
        }
    }

    fn key(&self, p: &GeoPoint) -> (i64, i64) {
        ((p.lon() / self.cell).floor() as i64, (p.lat() / self.cell).floor() as i64)
    }

    fn insert(&mut self, prio: Priority, p: GeoPoint) {
        let k = self.key(&p);
        self.cells.entry(k).or_default().push((prio, p));
    }

    fn neighbors(&self, p: &GeoPoint) -> impl Iterator<Item = &(Priority, GeoPoint)> {
        let (ix, iy) = self.key(p);
        let n = self.lon_cells;
        (-1..=1)
            .flat_map(move |dx| (-1..=1).map(move |dy| (((ix + dx).rem_euclid(n)), iy + dy)))
            .filter_map(|k| self.cells.get(&k))
            .flatten()
    }
}

fn same_position(a: &GeoPoint, b: &GeoPoint) -> bool {
    a.lon() == b.lon() && a.lat() == b.lat()
}

fn parts_mut(g: &mut Geometry<GeoPoint>) -> Vec<&mut GeoPoint> {
    match g {
        Geometry::Point(p) => vec![p],
        Geometry::PolyLine(v) => v.iter_mut().collect(),
        Geometry::Polygon(r) => r.iter_mut().flatten().collect(),
        Geometry::MultiPolygon(ps) => ps.iter_mut().flatten().flatten().collect(),
    }
}

fn rings_mut(g: &mut Geometry<GeoPoint>) -> Vec<&mut Vec<GeoPoint>> {
    match g {
        Geometry::Polygon(r) => r.iter_mut().collect(),
        Geometry::MultiPolygon(ps) => ps.iter_mut().flatten().collect(),
        _ => Vec::new(),
    }
}

/// Closes rings whose end lies within `tol` of their start.
fn close_rings(g: &mut Geometry<GeoPoint>, tol: f64, report: &mut CleanReport) -> Result<(), String> {
    for ring in rings_mut(g) {
        let (Some(&first), Some(&last)) = (ring.first(), ring.last()) else {
            return Err("empty ring".into());
        };
        if first == last {
            continue;
        }
        let gap = degree_distance(&first, &last);
        if gap <= tol && ring.len() > 1 {
            *ring.last_mut().expect("non-empty") = first;
            report.rings_closed += 1;
        } else {
            return Err(format!("ring not closed: end is {gap:.3e} degrees from start"));
        }
    }
    Ok(())
}

fn snap(g: &mut Geometry<GeoPoint>, own: Priority, grid: &SnapGrid, tol: f64, report: &mut CleanReport) {
    for v in parts_mut(g) {
        let mut best: Option<(Priority, f64, GeoPoint)> = None;
        let mut coincides = false;
        for (prio, c) in grid.neighbors(v) {
            if *prio >= own {
                continue;
            }
            if same_position(v, c) {
                coincides = true;
                break;
            }
            let d = degree_distance(v, c);
            if d > tol {
                continue;
            }
            let better = match &best {
                None => true,
                Some((bp, bd, bc)) => (*prio, d, c.lon(), c.lat()) < (*bp, *bd, bc.lon(), bc.lat()),
            };
            if better {
                best = Some((*prio, d, *c));
            }
        }
        if coincides {
            continue;
        }
        if let Some((_, _, c)) = best {
            *v = c;
            report.vertices_snapped += 1;
        }
    }
}

fn dedupe(g: &mut Geometry<GeoPoint>, report: &mut CleanReport) {
    for part in g.parts_mut() {
        let before = part.len();
        part.dedup_by(|a, b| same_position(a, b));
        report.duplicate_vertices_removed += before - part.len();
    }
}

fn check_vertex_counts(g: &Geometry<GeoPoint>) -> Result<(), String> {
    match g {
        Geometry::Point(_) => Ok(()),
        Geometry::PolyLine(v) if v.len() < 2 => Err(format!("polyline has {} distinct vertices", v.len())),
        Geometry::PolyLine(_) => Ok(()),
        _ => {
            for poly in g.polygons() {
                if poly.is_empty() {
                    return Err("polygon without rings".into());
                }
                for ring in poly {
                    if ring.len() < 4 {
                        return Err(format!("ring has {} vertices after cleaning", ring.len()));
                    }
                }
            }
            Ok(())
        }
    }
}

pub(super) fn clean_topology(w: &mut Warehouse, layer: &str, opts: &CleanOptions) -> Result<CleanReport, WarehouseError> {
    let tol = opts.snap_tol;
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(WarehouseError::Parse(format!("snap tolerance {tol} must be finite and non-negative")));
    }
    let target_index = w
        .layers
        .iter()
        .position(|l| l.spec.name == layer)
        .ok_or_else(|| WarehouseError::UnknownLayer(layer.to_string()))?;

    let mut grid = (tol > 0.0).then(|| SnapGrid::new(tol));
    if let Some(grid) = grid.as_mut() {
        for (rank, name) in opts.reference_layers.iter().enumerate() {
            if name == layer {
                continue;
            }
            for f in w.layer(name)?.features() {
                f.geometry.for_each_vertex(|p| grid.insert((0, rank, f.id), *p));
            }
        }
    }

    let mut report = CleanReport::default();
    let features = &mut w.layers[target_index].features;
    let mut rejected_ids = Vec::new();
    for f in features.values_mut() {
        let Feature { id, geometry, .. } = f;
        let own = (1, 0, *id);
        let outcome = close_rings(geometry, tol, &mut report).and_then(|()| {
            if let Some(grid) = &grid {
                snap(geometry, own, grid, tol, &mut report);
            }
            dedupe(geometry, &mut report);
            check_vertex_counts(geometry)
        });
        match outcome {
            Ok(()) => {
                report.rings_reoriented += orient_geometry(geometry);
                if let Some(grid) = grid.as_mut() {
                    geometry.for_each_vertex(|p| grid.insert(own, *p));
                }
            }
            Err(reason) => {
                rejected_ids.push(*id);
                report.rejected.push(Rejection { id: *id, reason });
            }
        }
    }
    for id in rejected_ids {
        features.remove(&id);
    }
    report.features_stored = features.len();
    if report.changes() > 0 {
        w.touch();
    }
    Ok(report)
}
