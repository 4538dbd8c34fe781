use std::collections::BTreeMap;

use super::geometry::{degree_distance, Geometry};
use super::{CleanReport, Feature, Warehouse, WarehouseError};
use crate::geo::GeoPoint;

fn near(a: &GeoPoint, b: &GeoPoint, tol: f64) -> bool {
    degree_distance(a, b) <= tol
}

/// Concatenates two polylines meeting end to end. The lower-id line `a`
/// keeps its direction and supplies the joint vertex.
fn join_lines(a: &[GeoPoint], b: &[GeoPoint], tol: f64) -> Option<Vec<GeoPoint>> {
    let (a0, a1) = (a.first()?, a.last()?);
    let (b0, b1) = (b.first()?, b.last()?);
    let mut out = Vec::with_capacity(a.len() + b.len() - 1);
    if near(a1, b0, tol) {
        out.extend_from_slice(a);
        out.extend_from_slice(&b[1..]);
    } else if near(a1, b1, tol) {
        out.extend_from_slice(a);
        out.extend(b.iter().rev().skip(1));
    } else if near(a0, b1, tol) {
        out.extend_from_slice(&b[..b.len() - 1]);
        out.extend_from_slice(a);
    } else if near(a0, b0, tol) {
        out.extend(b.iter().rev().take(b.len() - 1));
        out.extend_from_slice(a);
    } else {
        return None;
    }
    Some(out)
}

/// Longest chain where `p[s + i]` matches `q[t - i]` (rings without their
/// closing vertex). Two counter-clockwise rings sharing a seam traverse it
/// in opposite directions.
fn shared_chain(p: &[GeoPoint], q: &[GeoPoint], tol: f64) -> Option<(usize, usize, usize)> {
    let (m, k) = (p.len(), q.len());
    let limit = m.min(k) - 1;
    let mut best: Option<(usize, usize, usize)> = None;
    for s in 0..m {
        for t in 0..k {
            if !near(&p[s], &q[t], tol) {
                continue;
            }
            // Only start at the beginning of a chain.
            if near(&p[(s + m - 1) % m], &q[(t + 1) % k], tol) {
                continue;
            }
            let mut len = 1;
            while len < limit && near(&p[(s + len) % m], &q[(t + k * len - len) % k], tol) {
                len += 1;
            }
            if len >= 2 && best.is_none_or(|(_, _, l)| len > l) {
                best = Some((s, t, len));
            }
        }
    }
    best
}

/// Dissolves two outer rings along their longest shared seam.
fn dissolve(p: &[GeoPoint], q: &[GeoPoint], tol: f64) -> Option<Vec<GeoPoint>> {
    if p.len() < 4 || q.len() < 4 {
        return None;
    }
    let (p, q) = (&p[..p.len() - 1], &q[..q.len() - 1]);
    let (m, k) = (p.len(), q.len());
    let (s, t, len) = shared_chain(p, q, tol)?;
    let mut out = Vec::with_capacity(m + k - 2 * len + 3);
    for i in (s + len - 1)..=(s + m) {
        out.push(p[i % m]);
    }
    for i in (t + 1)..=(t + k - len) {
        out.push(q[i % k]);
    }
    out.push(out[0]);
    (out.len() >= 4).then_some(out)
}

fn single_polygon(g: &Geometry<GeoPoint>) -> Option<&Vec<Vec<GeoPoint>>> {
    match g {
        Geometry::Polygon(rings) => Some(rings),
        Geometry::MultiPolygon(ps) if ps.len() == 1 => Some(&ps[0]),
        _ => None,
    }
}

fn join(a: &Geometry<GeoPoint>, b: &Geometry<GeoPoint>, tol: f64) -> Option<Geometry<GeoPoint>> {
    if let (Geometry::PolyLine(x), Geometry::PolyLine(y)) = (a, b) {
        return join_lines(x, y, tol).map(Geometry::PolyLine);
    }
    let (pa, pb) = (single_polygon(a)?, single_polygon(b)?);
    let outer = dissolve(pa.first()?, pb.first()?, tol)?;
    let mut rings = vec![outer];
    rings.extend(pa[1..].iter().cloned());
    rings.extend(pb[1..].iter().cloned());
    Some(match a {
        Geometry::MultiPolygon(_) => Geometry::MultiPolygon(vec![rings]),
        _ => Geometry::Polygon(rings),
    })
}

fn conflict_notes(layer: &str, keep: &Feature, gone: &Feature) -> Vec<String> {
    let mut notes = Vec::new();
    for (name, value) in &gone.attributes {
        match keep.attributes.get(name) {
            Some(v) if v == value => {}
            kept => notes.push(format!(
                "{layer}: feature {}: attribute '{name}' kept {} over {} from feature {}",
                keep.id,
                kept.map_or("(absent)".to_string(), |v| format!("'{v}'")),
                format!("'{value}'"),
                gone.id
            )),
        }
    }
    notes
}

pub(super) fn merge_sheets(w: &mut Warehouse, layer: &str, seam_tol: f64) -> Result<CleanReport, WarehouseError> {
    if !(seam_tol.is_finite() && seam_tol >= 0.0) {
        return Err(WarehouseError::Parse(format!("seam tolerance {seam_tol} must be finite and non-negative")));
    }
    let mut groups: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for f in w.layer(layer)?.features() {
        if let Some(k) = f.merge_key() {
            groups.entry(k.to_string()).or_default().push(f.id);
        }
    }

    let mut report = CleanReport::default();
    let mut notes = Vec::new();
    let features = &mut w.layer_mut(layer)?.features;
    for (key, mut ids) in groups {
        'merge: loop {
            for i in 0..ids.len() {
                for j in i + 1..ids.len() {
                    let (a, b) = (&features[&ids[i]], &features[&ids[j]]);
                    let Some(joined) = join(&a.geometry, &b.geometry, seam_tol) else {
                        continue;
                    };
                    notes.push(format!("{layer}: merged feature {} into {} (key '{key}')", b.id, a.id));
                    notes.extend(conflict_notes(layer, a, b));
                    let gone = ids.remove(j);
                    features.remove(&gone);
                    features.get_mut(&ids[i]).expect("present").geometry = joined;
                    report.features_merged += 1;
                    continue 'merge;
                }
            }
            break;
        }
        if ids.len() > 1 {
            report.unmerged.push(format!(
                "{layer}: key '{key}': features {ids:?} share no seam within {seam_tol} degrees"
            ));
        }
    }
    report.features_stored = features.len();
    if report.changes() > 0 {
        for n in notes {
            w.add_provenance(n);
        }
        w.touch();
    }
    Ok(report)
}
