//! `PIWA1` warehouse container. See `docs/warehouse-format.md`.
//!
//! ```text
//! "PIWA1" | u32 version | u32 n | header JSON (n bytes)
//! per layer, per feature: u64 id | geometry | u32 m | attributes JSON (m bytes)
//! u32 CRC-32 of everything before it
//! ```
//!
//! Integers and floats are little-endian. Geometry is a tag byte
//! (0 point, 1 polyline, 2 polygon, 3 multipolygon) followed by u32 counts
//! and `(lon, lat, h)` f64 triples.

use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::geometry::Geometry;
use super::{Attributes, Feature, Layer, LayerSpec, Metadata, Warehouse, WarehouseError};
use crate::fsutil;
use crate::geo::GeoPoint;

pub const WAREHOUSE_MAGIC: &[u8; 5] = b"PIWA1";
pub const WAREHOUSE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    code: String,
    metadata: Metadata,
    layers: Vec<LayerSpec>,
    feature_counts: Vec<u64>,
}

fn put_coord(out: &mut Vec<u8>, p: &GeoPoint) {
    for v in [p.lon(), p.lat(), p.h()] {
        out.write_f64::<LE>(v).expect("vec write");
    }
}

fn put_len(out: &mut Vec<u8>, n: usize) {
    out.write_u32::<LE>(u32::try_from(n).expect("count fits u32")).expect("vec write");
}

fn put_line(out: &mut Vec<u8>, v: &[GeoPoint]) {
    put_len(out, v.len());
    v.iter().for_each(|p| put_coord(out, p));
}

fn put_rings(out: &mut Vec<u8>, rings: &[Vec<GeoPoint>]) {
    put_len(out, rings.len());
    rings.iter().for_each(|r| put_line(out, r));
}

pub(super) fn encode(w: &Warehouse) -> Vec<u8> {
    let header = Header {
        code: w.code.clone(),
        metadata: w.metadata.clone(),
        layers: w.layer_specs(),
        feature_counts: w.layers.iter().map(|l| l.len() as u64).collect(),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(WAREHOUSE_MAGIC);
    out.write_u32::<LE>(WAREHOUSE_VERSION).expect("vec write");
    put_len(&mut out, header.len());
    out.extend_from_slice(&header);
    for layer in &w.layers {
        for f in layer.features() {
            out.write_u64::<LE>(f.id).expect("vec write");
            match &f.geometry {
                Geometry::Point(p) => {
                    out.push(0);
                    put_coord(&mut out, p);
                }
                Geometry::PolyLine(v) => {
                    out.push(1);
                    put_line(&mut out, v);
                }
                Geometry::Polygon(r) => {
                    out.push(2);
                    put_rings(&mut out, r);
                }
                Geometry::MultiPolygon(ps) => {
                    out.push(3);
                    put_len(&mut out, ps.len());
                    ps.iter().for_each(|p| put_rings(&mut out, p));
                }
            }
            let attrs = serde_json::to_vec(&f.attributes).expect("attributes serialize");
            put_len(&mut out, attrs.len());
            out.extend_from_slice(&attrs);
        }
    }
    let crc = crc32fast::hash(&out);
    out.write_u32::<LE>(crc).expect("vec write");
    out
}

fn corrupt(msg: impl Into<String>) -> WarehouseError {
    WarehouseError::Corrupt(msg.into())
}

struct Reader<'a> {
    cur: Cursor<&'a [u8]>,
}

impl Reader<'_> {
    fn remaining(&self) -> usize {
        self.cur.get_ref().len() - self.cur.position() as usize
    }

    fn u8(&mut self) -> Result<u8, WarehouseError> {
        self.cur.read_u8().map_err(|_| corrupt("truncated"))
    }

    fn u32(&mut self) -> Result<u32, WarehouseError> {
        self.cur.read_u32::<LE>().map_err(|_| corrupt("truncated"))
    }

    fn u64(&mut self) -> Result<u64, WarehouseError> {
        self.cur.read_u64::<LE>().map_err(|_| corrupt("truncated"))
    }

    /// Reads a count of items each at least `min_size` bytes long.
    fn count(&mut self, min_size: usize) -> Result<usize, WarehouseError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(min_size) > self.remaining() {
            return Err(corrupt(format!("count {n} exceeds remaining data")));
        }
        Ok(n)
    }

    fn bytes(&mut self, n: usize) -> Result<Vec<u8>, WarehouseError> {
        if n > self.remaining() {
            return Err(corrupt("truncated"));
        }
        let mut buf = vec![0; n];
        self.cur.read_exact(&mut buf).map_err(|_| corrupt("truncated"))?;
        Ok(buf)
    }

    fn coord(&mut self) -> Result<GeoPoint, WarehouseError> {
        let mut v = [0.0; 3];
        for x in &mut v {
            *x = self.cur.read_f64::<LE>().map_err(|_| corrupt("truncated"))?;
        }
        // Unchecked so that `validate` can report bad stored values.
        Ok(GeoPoint::from_raw(v[0], v[1], v[2]))
    }

    fn line(&mut self) -> Result<Vec<GeoPoint>, WarehouseError> {
        let n = self.count(24)?;
        (0..n).map(|_| self.coord()).collect()
    }

    fn rings(&mut self) -> Result<Vec<Vec<GeoPoint>>, WarehouseError> {
        let n = self.count(4)?;
        (0..n).map(|_| self.line()).collect()
    }
}

pub(super) fn decode(bytes: &[u8]) -> Result<Warehouse, WarehouseError> {
    if bytes.len() < WAREHOUSE_MAGIC.len() || &bytes[..5] != WAREHOUSE_MAGIC {
        return Err(WarehouseError::BadMagic);
    }
    if bytes.len() < 9 {
        return Err(corrupt("truncated"));
    }
    let version = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes"));
    if version != WAREHOUSE_VERSION {
        return Err(WarehouseError::UnsupportedVersion(version));
    }
    if bytes.len() < 13 {
        return Err(corrupt("truncated"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(corrupt("checksum mismatch"));
    }
    let mut r = Reader { cur: Cursor::new(body) };
    r.cur.set_position(9);
    let hlen = r.count(1)?;
    let header: Header =
        serde_json::from_slice(&r.bytes(hlen)?).map_err(|e| corrupt(format!("header: {e}")))?;
    if header.layers.len() != header.feature_counts.len() {
        return Err(corrupt("layer table and counts disagree"));
    }
    let mut layers = Vec::with_capacity(header.layers.len());
    for (spec, &count) in header.layers.into_iter().zip(&header.feature_counts) {
        let mut layer = Layer::new(spec);
        for _ in 0..count {
            let id = r.u64()?;
            let geometry = match r.u8()? {
                0 => Geometry::Point(r.coord()?),
                1 => Geometry::PolyLine(r.line()?),
                2 => Geometry::Polygon(r.rings()?),
                3 => {
                    let n = r.count(4)?;
                    Geometry::MultiPolygon((0..n).map(|_| r.rings()).collect::<Result<_, _>>()?)
                }
                t => return Err(corrupt(format!("unknown geometry tag {t}"))),
            };
            let alen = r.count(1)?;
            let attributes: Attributes =
                serde_json::from_slice(&r.bytes(alen)?).map_err(|e| corrupt(format!("attributes: {e}")))?;
            if layer.features.insert(id, Feature { id, geometry, attributes }).is_some() {
                return Err(corrupt(format!("duplicate feature id {id}")));
            }
        }
        layers.push(layer);
    }
    if r.remaining() != 0 {
        return Err(corrupt("trailing bytes"));
    }
    Ok(Warehouse {
        code: header.code,
        layers,
        metadata: header.metadata,
    })
}

pub(super) fn save(w: &Warehouse, path: &Path) -> Result<(), WarehouseError> {
    let _lock = fsutil::lock_for_write(path)?;
    fsutil::atomic_write(path, &encode(w))?;
    Ok(())
}

pub(super) fn load(path: &Path) -> Result<Warehouse, WarehouseError> {
    decode(&std::fs::read(path)?)
}
