//! `PISC1` byte layout.
//!
//! ```text
//! "PISC1" | u32 version | u32 n | header JSON (n bytes) | body
//! ```
//!
//! The body holds, per layer, the packed R-tree levels (root first, 40-byte
//! items: four f64 then a u64 payload) followed by the feature records in
//! ascending id order. Offsets in the header are relative to the body. All
//! numbers are little-endian; coordinates are projected meters.

use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::index::{NodeItem, PackedRTree, Rect};
use super::{CacheError, CacheLayer, CacheSpec, CachedFeature, SmartCache};
use crate::geo::ProjectedPoint;
use crate::warehouse::{Attributes, Geometry, LayerSpec};

pub const CACHE_MAGIC: &[u8; 5] = b"PISC1";
pub const CACHE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    source_code: String,
    build_unix: u64,
    spec: CacheSpec,
    layers: Vec<LayerHeader>,
    body_len: u64,
    body_crc32: u32,
}

#[derive(Serialize, Deserialize)]
struct LayerHeader {
    spec: LayerSpec,
    feature_count: u64,
    dropped_out_of_zone: u64,
    bbox: Option<Rect>,
    /// Item count per index level, root first.
    index_levels: Vec<u64>,
    index_offset: u64,
    records_offset: u64,
    records_len: u64,
}

fn w32(out: &mut Vec<u8>, n: usize) {
    out.write_u32::<LE>(u32::try_from(n).expect("count fits u32")).expect("vec write");
}

fn wf(out: &mut Vec<u8>, v: f64) {
    out.write_f64::<LE>(v).expect("vec write");
}

fn wpoint(out: &mut Vec<u8>, p: &ProjectedPoint) {
    wf(out, p.x());
    wf(out, p.y());
}

fn wline(out: &mut Vec<u8>, v: &[ProjectedPoint]) {
    w32(out, v.len());
    v.iter().for_each(|p| wpoint(out, p));
}

fn wrings(out: &mut Vec<u8>, r: &[Vec<ProjectedPoint>]) {
    w32(out, r.len());
    r.iter().for_each(|l| wline(out, l));
}

fn write_record(out: &mut Vec<u8>, f: &CachedFeature) {
    out.write_u64::<LE>(f.id).expect("vec write");
    match &f.geometry {
        Geometry::Point(p) => {
            out.push(0);
            wpoint(out, p);
        }
        Geometry::PolyLine(v) => {
            out.push(1);
            wline(out, v);
        }
        Geometry::Polygon(r) => {
            out.push(2);
            wrings(out, r);
        }
        Geometry::MultiPolygon(ps) => {
            out.push(3);
            w32(out, ps.len());
            ps.iter().for_each(|p| wrings(out, p));
        }
    }
    let attrs = serde_json::to_vec(&f.attributes).expect("attributes serialize");
    w32(out, attrs.len());
    out.extend_from_slice(&attrs);
}

pub(super) fn encode(cache: &SmartCache) -> Vec<u8> {
    let mut body = Vec::new();
    let mut layers = Vec::new();
    for l in &cache.layers {
        let index_offset = body.len() as u64;
        for level in l.index.levels() {
            for item in level {
                item.rect.iter().for_each(|v| wf(&mut body, *v));
                body.write_u64::<LE>(item.payload).expect("vec write");
            }
        }
        let records_offset = body.len() as u64;
        for f in &l.features {
            write_record(&mut body, f);
        }
        layers.push(LayerHeader {
            spec: l.spec.clone(),
            feature_count: l.features.len() as u64,
            dropped_out_of_zone: l.dropped_out_of_zone,
            bbox: l.index.bounds(),
            index_levels: l.index.levels().iter().map(|v| v.len() as u64).collect(),
            index_offset,
            records_offset,
            records_len: body.len() as u64 - records_offset,
        });
    }
    let header = Header {
        source_code: cache.source_code.clone(),
        build_unix: cache.build_unix,
        spec: cache.spec.clone(),
        layers,
        body_len: body.len() as u64,
        body_crc32: crc32fast::hash(&body),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(13 + header.len() + body.len());
    out.extend_from_slice(CACHE_MAGIC);
    out.write_u32::<LE>(CACHE_VERSION).expect("vec write");
    w32(&mut out, header.len());
    out.extend_from_slice(&header);
    out.extend_from_slice(&body);
    out
}

fn corrupt(m: impl Into<String>) -> CacheError {
    CacheError::Corrupt(m.into())
}

struct Reader<'a> {
    cur: Cursor<&'a [u8]>,
    end: u64,
}

impl<'a> Reader<'a> {
    fn new(body: &'a [u8], start: u64, len: u64) -> Result<Self, CacheError> {
        let end = start.checked_add(len).ok_or_else(|| corrupt("section overflows"))?;
        if end > body.len() as u64 {
            return Err(corrupt("section extends past the body"));
        }
        let mut cur = Cursor::new(body);
        cur.set_position(start);
        Ok(Reader { cur, end })
    }

    fn left(&self) -> u64 {
        self.end - self.cur.position()
    }

    fn need(&self, n: u64) -> Result<(), CacheError> {
        if n > self.left() {
            Err(corrupt("record runs past its section"))
        } else {
            Ok(())
        }
    }

    fn u8(&mut self) -> Result<u8, CacheError> {
        self.need(1)?;
        Ok(self.cur.read_u8()?)
    }

    fn u32(&mut self) -> Result<u32, CacheError> {
        self.need(4)?;
        Ok(self.cur.read_u32::<LE>()?)
    }

    fn u64(&mut self) -> Result<u64, CacheError> {
        self.need(8)?;
        Ok(self.cur.read_u64::<LE>()?)
    }

    fn f64(&mut self) -> Result<f64, CacheError> {
        self.need(8)?;
        Ok(self.cur.read_f64::<LE>()?)
    }

    fn count(&mut self, min_size: u64) -> Result<usize, CacheError> {
        let n = self.u32()? as u64;
        self.need(n * min_size)?;
        Ok(n as usize)
    }

    fn point(&mut self) -> Result<ProjectedPoint, CacheError> {
        let (x, y) = (self.f64()?, self.f64()?);
        ProjectedPoint::new(x, y).map_err(|_| corrupt("non-finite coordinate"))
    }

    fn line(&mut self) -> Result<Vec<ProjectedPoint>, CacheError> {
        let n = self.count(16)?;
        (0..n).map(|_| self.point()).collect()
    }

    fn rings(&mut self) -> Result<Vec<Vec<ProjectedPoint>>, CacheError> {
        let n = self.count(4)?;
        (0..n).map(|_| self.line()).collect()
    }

    fn record(&mut self) -> Result<CachedFeature, CacheError> {
        let id = self.u64()?;
        let geometry = match self.u8()? {
            0 => Geometry::Point(self.point()?),
            1 => Geometry::PolyLine(self.line()?),
            2 => Geometry::Polygon(self.rings()?),
            3 => {
                let n = self.count(4)?;
                Geometry::MultiPolygon((0..n).map(|_| self.rings()).collect::<Result<_, _>>()?)
            }
            t => return Err(corrupt(format!("unknown geometry tag {t}"))),
        };
        let n = self.count(1)?;
        let mut buf = vec![0; n];
        self.cur.read_exact(&mut buf)?;
        let attributes: Attributes = serde_json::from_slice(&buf).map_err(|e| corrupt(format!("attributes: {e}")))?;
        let bbox = geometry.bbox();
        Ok(CachedFeature {
            id,
            geometry,
            attributes,
            bbox,
        })
    }
}

pub(super) fn decode(bytes: &[u8], path: &Path) -> Result<SmartCache, CacheError> {
    if bytes.len() < 5 || &bytes[..5] != CACHE_MAGIC {
        return Err(CacheError::BadMagic);
    }
    if bytes.len() < 13 {
        return Err(corrupt("truncated header"));
    }
    let version = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes"));
    if version != CACHE_VERSION {
        return Err(CacheError::UnsupportedVersion(version));
    }
    let hlen = u32::from_le_bytes(bytes[9..13].try_into().expect("4 bytes")) as usize;
    let body_start = 13 + hlen;
    if bytes.len() < body_start {
        return Err(corrupt("truncated header"));
    }
    let header: Header = serde_json::from_slice(&bytes[13..body_start]).map_err(|e| corrupt(format!("header: {e}")))?;
    let body = &bytes[body_start..];
    if (body.len() as u64) < header.body_len {
        return Err(corrupt(format!("truncated body: {} of {} bytes", body.len(), header.body_len)));
    }
    if body.len() as u64 != header.body_len {
        return Err(corrupt("trailing bytes after body"));
    }
    if crc32fast::hash(body) != header.body_crc32 {
        return Err(corrupt("body checksum mismatch"));
    }

    let mut layers = Vec::with_capacity(header.layers.len());
    for lh in header.layers {
        let items: u64 = lh.index_levels.iter().sum();
        let mut r = Reader::new(body, lh.index_offset, items.checked_mul(40).ok_or_else(|| corrupt("index size"))?)?;
        let mut levels = Vec::with_capacity(lh.index_levels.len());
        for &n in &lh.index_levels {
            let mut level = Vec::with_capacity(n as usize);
            for _ in 0..n {
                let rect = [r.f64()?, r.f64()?, r.f64()?, r.f64()?];
                level.push(NodeItem { rect, payload: r.u64()? });
            }
            levels.push(level);
        }
        let index = PackedRTree::from_levels(levels, lh.feature_count as usize).map_err(corrupt)?;

        let mut r = Reader::new(body, lh.records_offset, lh.records_len)?;
        let mut features: Vec<CachedFeature> = Vec::with_capacity(lh.feature_count.min(1 << 24) as usize);
        for _ in 0..lh.feature_count {
            let f = r.record()?;
            if features.last().is_some_and(|prev| prev.id >= f.id) {
                return Err(corrupt("records out of id order"));
            }
            features.push(f);
        }
        if r.left() != 0 {
            return Err(corrupt("unread bytes in records section"));
        }
        layers.push(CacheLayer {
            spec: lh.spec,
            features,
            index,
            dropped_out_of_zone: lh.dropped_out_of_zone,
        });
    }
    Ok(SmartCache {
        path: path.to_path_buf(),
        file_size: bytes.len() as u64,
        source_code: header.source_code,
        build_unix: header.build_unix,
        spec: header.spec,
        layers,
    })
}
