//! GeoJSON FeatureCollection reading and writing.
//!
//! Follows RFC 7946 with two conventions of this project: longitudes may lie
//! in `[0, 360)`, and every feature carries a non-negative integer `id`.
//! A third coordinate, when present, is ellipsoidal height.

use serde_json::{Map, Value};

use super::geometry::{Geometry, GeometryKind};
use super::{Feature, WarehouseError};
use crate::geo::GeoPoint;

/// A source coordinate `(x, y, h)` before any transformation.
pub type RawCoord = (f64, f64, f64);

/// One parsed feature, geometry still in source coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeature {
    pub id: u64,
    /// `None` for a `null` geometry, which ingest rejects per feature.
    pub geometry: Option<Geometry<RawCoord>>,
    /// GeoJSON type name as written, for error messages.
    pub geometry_type: String,
    pub properties: Map<String, Value>,
}

fn perr(msg: impl Into<String>) -> WarehouseError {
    WarehouseError::Parse(msg.into())
}

fn coord(v: &Value) -> Result<RawCoord, WarehouseError> {
    let arr = v.as_array().ok_or_else(|| perr("position must be an array"))?;
    if !(2..=3).contains(&arr.len()) {
        return Err(perr(format!("position must have 2 or 3 numbers, got {}", arr.len())));
    }
    let num = |i: usize| {
        arr.get(i)
            .map(|x| x.as_f64().ok_or_else(|| perr("position values must be numbers")))
            .transpose()
    };
    Ok((num(0)?.unwrap_or(0.0), num(1)?.unwrap_or(0.0), num(2)?.unwrap_or(0.0)))
}

fn coord_list(v: &Value) -> Result<Vec<RawCoord>, WarehouseError> {
    v.as_array()
        .ok_or_else(|| perr("expected an array of positions"))?
        .iter()
        .map(coord)
        .collect()
}

fn ring_list(v: &Value) -> Result<Vec<Vec<RawCoord>>, WarehouseError> {
    v.as_array()
        .ok_or_else(|| perr("expected an array of rings"))?
        .iter()
        .map(coord_list)
        .collect()
}

fn parse_geometry(v: &Value) -> Result<(Option<Geometry<RawCoord>>, String), WarehouseError> {
    if v.is_null() {
        return Ok((None, "null".into()));
    }
    let obj = v.as_object().ok_or_else(|| perr("geometry must be an object or null"))?;
    let ty = obj
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| perr("geometry without a type"))?;
    let coords = obj
        .get("coordinates")
        .ok_or_else(|| perr(format!("{ty} geometry without coordinates")))?;
    let g = match ty {
        "Point" => Geometry::Point(coord(coords)?),
        "LineString" => Geometry::PolyLine(coord_list(coords)?),
        "Polygon" => Geometry::Polygon(ring_list(coords)?),
        "MultiPolygon" => Geometry::MultiPolygon(
            coords
                .as_array()
                .ok_or_else(|| perr("expected an array of polygons"))?
                .iter()
                .map(ring_list)
                .collect::<Result<_, _>>()?,
        ),
        other => return Err(perr(format!("unsupported geometry type '{other}'"))),
    };
    Ok((Some(g), ty.to_string()))
}

fn parse_id(f: &Map<String, Value>, index: usize) -> Result<u64, WarehouseError> {
    match f.get("id") {
        Some(Value::Number(n)) => n
            .as_u64()
            .ok_or_else(|| perr(format!("feature #{index}: id {n} is not a non-negative integer"))),
        Some(other) => Err(perr(format!("feature #{index}: id {other} is not a non-negative integer"))),
        None => Err(perr(format!("feature #{index} has no id"))),
    }
}

/// Parses a FeatureCollection. Structural problems fail the whole file.
pub fn parse_collection(text: &str) -> Result<Vec<RawFeature>, WarehouseError> {
    let root: Value = serde_json::from_str(text).map_err(|e| perr(e.to_string()))?;
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(perr("top level must be a FeatureCollection"));
    }
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| perr("FeatureCollection without a features array"))?;
    let mut out = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        let obj = f.as_object().ok_or_else(|| perr(format!("feature #{i} is not an object")))?;
        if obj.get("type").and_then(Value::as_str) != Some("Feature") {
            return Err(perr(format!("feature #{i} is not of type Feature")));
        }
        let id = parse_id(obj, i)?;
        let (geometry, geometry_type) = parse_geometry(obj.get("geometry").unwrap_or(&Value::Null))
            .map_err(|e| perr(format!("feature {id}: {e}")))?;
        let properties = match obj.get("properties") {
            None | Some(Value::Null) => Map::new(),
            Some(Value::Object(m)) => m.clone(),
            Some(_) => return Err(perr(format!("feature {id}: properties must be an object"))),
        };
        out.push(RawFeature {
            id,
            geometry,
            geometry_type,
            properties,
        });
    }
    Ok(out)
}

pub fn geojson_type(kind: GeometryKind) -> &'static str {
    match kind {
        GeometryKind::Point => "Point",
        GeometryKind::PolyLine => "LineString",
        GeometryKind::Polygon => "Polygon",
        GeometryKind::MultiPolygon => "MultiPolygon",
        GeometryKind::Image => "Image",
    }
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

fn position(p: &GeoPoint) -> Value {
    if p.h() == 0.0 {
        Value::Array(vec![num(p.lon()), num(p.lat())])
    } else {
        Value::Array(vec![num(p.lon()), num(p.lat()), num(p.h())])
    }
}

fn positions(v: &[GeoPoint]) -> Value {
    Value::Array(v.iter().map(position).collect())
}

fn rings(v: &[Vec<GeoPoint>]) -> Value {
    Value::Array(v.iter().map(|r| positions(r)).collect())
}

pub fn geometry_json(g: &Geometry<GeoPoint>) -> Value {
    let coords = match g {
        Geometry::Point(p) => position(p),
        Geometry::PolyLine(v) => positions(v),
        Geometry::Polygon(r) => rings(r),
        Geometry::MultiPolygon(ps) => Value::Array(ps.iter().map(|p| rings(p)).collect()),
    };
    let mut m = Map::new();
    m.insert("type".into(), geojson_type(g.kind()).into());
    m.insert("coordinates".into(), coords);
    Value::Object(m)
}

pub fn feature_json(f: &Feature) -> Value {
    let props: Map<String, Value> = f.attributes.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
    let mut m = Map::new();
    m.insert("type".into(), "Feature".into());
    m.insert("id".into(), f.id.into());
    m.insert("geometry".into(), geometry_json(&f.geometry));
    m.insert("properties".into(), Value::Object(props));
    Value::Object(m)
}

pub fn collection_json<'a>(features: impl IntoIterator<Item = &'a Feature>) -> Value {
    let mut m = Map::new();
    m.insert("type".into(), "FeatureCollection".into());
    m.insert(
        "features".into(),
        Value::Array(features.into_iter().map(feature_json).collect()),
    );
    Value::Object(m)
}

pub fn write_collection<'a>(features: impl IntoIterator<Item = &'a Feature>) -> String {
    let mut s = serde_json::to_string(&collection_json(features)).unwrap_or_default();
    s.push('\n');
    s
}
