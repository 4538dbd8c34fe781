//! Immutable, spatially indexed caches of projected geometry.
//!
//! A cache is built in one pass from a [`Warehouse`] and never modified:
//! [`rebuild_from`] replaces the whole file atomically, and an open
//! [`SmartCache`] keeps serving the snapshot it was opened on. The file
//! format is described in `docs/cache-format.md`.
//!
//! There is no way to change a cache in place:
//!
//! ```compile_fail
//! # fn f(c: &mut atlas_core::smartcache::SmartCache) {
//! c.insert_feature("coastline", 1);
//! # }
//! ```

mod format;
pub mod index;
mod spatial;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{GeoError, ProjectedPoint, ProjectionSpec};
use crate::warehouse::{Attributes, Geometry, GeometryKind, LayerSpec, Warehouse};
use crate::fsutil;
pub use format::{CACHE_MAGIC, CACHE_VERSION};
pub use index::{PackedRTree, Rect, NODE_SIZE};
pub use spatial::{distance_to, geometry_intersects_rect};

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("layer '{0}': rasters cannot be published")]
    RasterLayer(String),
    #[error("unknown layer '{0}'")]
    UnknownLayer(String),
    #[error("invalid cache spec: {0}")]
    InvalidSpec(String),
    #[error("warehouse does not validate: {0}")]
    WarehouseInvalid(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("not a cache file (bad magic)")]
    BadMagic,
    #[error("unsupported cache version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt cache file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A layer to publish, optionally restricted to some attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedLayer {
    pub name: String,
    /// `None` publishes every schema attribute.
    #[serde(default)]
    pub attributes: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheSpec {
    pub projection: ProjectionSpec,
    /// Landing scale recorded for clients.
    pub base_scale_denom: u32,
    pub layers: Vec<PublishedLayer>,
}

impl CacheSpec {
    /// Every vector layer of `w` with all attributes.
    pub fn all_vector_layers(w: &Warehouse, projection: ProjectionSpec, base_scale_denom: u32) -> CacheSpec {
        CacheSpec {
            projection,
            base_scale_denom,
            layers: w
                .layers()
                .iter()
                .filter(|l| l.spec.geometry_kind != GeometryKind::Image)
                .map(|l| PublishedLayer {
                    name: l.name().to_string(),
                    attributes: None,
                })
                .collect(),
        }
    }

    /// Published layer specs, schemas cut down to the published attributes.
    fn resolve(&self, w: &Warehouse) -> Result<Vec<LayerSpec>, CacheError> {
        if self.layers.is_empty() {
            return Err(CacheError::InvalidSpec("no layers selected".into()));
        }
        let mut out: Vec<LayerSpec> = Vec::new();
        for p in &self.layers {
            let layer = w.layer(&p.name).map_err(|_| CacheError::UnknownLayer(p.name.clone()))?;
            if layer.spec.geometry_kind == GeometryKind::Image {
                return Err(CacheError::RasterLayer(p.name.clone()));
            }
            if out.iter().any(|s| s.name == p.name) {
                return Err(CacheError::InvalidSpec(format!("layer '{}' listed twice", p.name)));
            }
            let mut spec = layer.spec.clone();
            if let Some(keep) = &p.attributes {
                for a in keep {
                    if spec.attribute(a).is_none() {
                        return Err(CacheError::InvalidSpec(format!(
                            "attribute '{a}' is not in the schema of '{}'",
                            p.name
                        )));
                    }
                }
                spec.attributes.retain(|a| keep.contains(&a.name));
            }
            out.push(spec);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CachedFeature {
    pub id: u64,
    pub geometry: Geometry<ProjectedPoint>,
    pub attributes: Attributes,
    pub bbox: Rect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheLayer {
    spec: LayerSpec,
    /// Ascending id order.
    features: Vec<CachedFeature>,
    index: PackedRTree,
    dropped_out_of_zone: u64,
}

impl CacheLayer {
    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn features(&self) -> &[CachedFeature] {
        &self.features
    }

    pub fn index(&self) -> &PackedRTree {
        &self.index
    }

    pub fn dropped_out_of_zone(&self) -> u64 {
        self.dropped_out_of_zone
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStats {
    pub name: String,
    pub features: u64,
    pub dropped_out_of_zone: u64,
    pub index_depth: usize,
    pub bbox: Option<Rect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheStats {
    pub source_code: String,
    pub layers: Vec<LayerStats>,
    pub index_depth: usize,
    pub file_size: u64,
    pub build_unix: u64,
    pub base_scale_denom: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub path: PathBuf,
    pub layers: Vec<LayerStats>,
    pub bytes: u64,
    /// The previous file had exactly the same bytes.
    pub identical_to_previous: bool,
    pub build_unix: u64,
}

impl BuildReport {
    pub fn dropped_out_of_zone(&self) -> u64 {
        self.layers.iter().map(|l| l.dropped_out_of_zone).sum()
    }

    pub fn feature_count(&self) -> u64 {
        self.layers.iter().map(|l| l.features).sum()
    }
}

/// Read-only handle on a cache snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SmartCache {
    path: PathBuf,
    file_size: u64,
    source_code: String,
    build_unix: u64,
    spec: CacheSpec,
    layers: Vec<CacheLayer>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointHit<'a> {
    pub distance: f64,
    pub feature: &'a CachedFeature,
}

fn check_rect(r: &Rect) -> Result<(), CacheError> {
    if r.iter().all(|v| v.is_finite()) && r[0] <= r[2] && r[1] <= r[3] {
        Ok(())
    } else {
        Err(CacheError::InvalidQuery(format!("bbox {r:?} must be finite with min <= max")))
    }
}

impl SmartCache {
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn source_code(&self) -> &str {
        &self.source_code
    }

    pub fn spec(&self) -> &CacheSpec {
        &self.spec
    }

    pub fn projection(&self) -> &ProjectionSpec {
        &self.spec.projection
    }

    pub fn build_unix(&self) -> u64 {
        self.build_unix
    }

    /// Layers in publication order.
    pub fn layers(&self) -> &[CacheLayer] {
        &self.layers
    }

    pub fn layer(&self, name: &str) -> Result<&CacheLayer, CacheError> {
        self.layers
            .iter()
            .find(|l| l.spec.name == name)
            .ok_or_else(|| CacheError::UnknownLayer(name.to_string()))
    }

    /// Features whose geometry meets `bbox`, ascending by id.
    pub fn query_bbox(&self, layer: &str, bbox: &Rect) -> Result<Vec<&CachedFeature>, CacheError> {
        check_rect(bbox)?;
        let l = self.layer(layer)?;
        let mut ordinals = Vec::new();
        l.index.search(bbox, |o| ordinals.push(o as usize));
        ordinals.sort_unstable();
        Ok(ordinals
            .into_iter()
            .map(|o| &l.features[o])
            .filter(|f| geometry_intersects_rect(&f.geometry, &f.bbox, bbox))
            .collect())
    }

    /// Linear-scan equivalent of [`query_bbox`](Self::query_bbox), kept as
    /// the baseline for measurements.
    pub fn scan_bbox(&self, layer: &str, bbox: &Rect) -> Result<Vec<&CachedFeature>, CacheError> {
        check_rect(bbox)?;
        let l = self.layer(layer)?;
        Ok(l.features
            .iter()
            .filter(|f| geometry_intersects_rect(&f.geometry, &f.bbox, bbox))
            .collect())
    }

    /// Features within `tol` meters of `p`, sorted by (distance, id).
    pub fn query_point(&self, layer: &str, p: &ProjectedPoint, tol: f64) -> Result<Vec<PointHit<'_>>, CacheError> {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(CacheError::InvalidQuery(format!("tolerance {tol} must be positive")));
        }
        let l = self.layer(layer)?;
        let q = [p.x() - tol, p.y() - tol, p.x() + tol, p.y() + tol];
        let mut hits = Vec::new();
        l.index.search(&q, |o| {
            let f = &l.features[o as usize];
            let d = distance_to(&f.geometry, p);
            if d <= tol {
                hits.push(PointHit { distance: d, feature: f });
            }
        });
        hits.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.feature.id.cmp(&b.feature.id)));
        Ok(hits)
    }

    /// The exact file bytes of this snapshot.
    pub fn to_bytes(&self) -> Vec<u8> {
        format::encode(self)
    }

    pub fn stats(&self) -> CacheStats {
        let layers: Vec<LayerStats> = self.layers.iter().map(layer_stats).collect();
        CacheStats {
            source_code: self.source_code.clone(),
            index_depth: layers.iter().map(|l| l.index_depth).max().unwrap_or(0),
            layers,
            file_size: self.file_size,
            build_unix: self.build_unix,
            base_scale_denom: self.spec.base_scale_denom,
        }
    }
}

fn layer_stats(l: &CacheLayer) -> LayerStats {
    LayerStats {
        name: l.spec.name.clone(),
        features: l.features.len() as u64,
        dropped_out_of_zone: l.dropped_out_of_zone,
        index_depth: l.index.depth(),
        bbox: l.index.bounds(),
    }
}

/// Opens a cache file and loads it into memory.
pub fn open_cache(path: &Path) -> Result<SmartCache, CacheError> {
    let bytes = std::fs::read(path)?;
    format::decode(&bytes, path)
}

/// Projects the selected layers of `w` and writes a new cache to `out`,
/// atomically replacing any existing file.
pub fn build_cache(w: &Warehouse, spec: &CacheSpec, out: &Path) -> Result<BuildReport, CacheError> {
    let specs = spec.resolve(w)?;
    let validation = w.validate();
    if !validation.is_ok() {
        let failed: Vec<&str> = validation
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        return Err(CacheError::WarehouseInvalid(format!(
            "{} failures in {}",
            validation.failure_count(),
            failed.join(", ")
        )));
    }
    let projector = spec.projection.projector();
    let mut layers = Vec::with_capacity(specs.len());
    for lspec in specs {
        let source = w.layer(&lspec.name).map_err(|_| CacheError::UnknownLayer(lspec.name.clone()))?;
        let mut features = Vec::with_capacity(source.len());
        let mut dropped = 0;
        for f in source.features() {
            let Ok(geometry) = f.geometry.try_map(|p| projector.forward(p)) else {
                dropped += 1;
                continue;
            };
            let attributes = f
                .attributes
                .iter()
                .filter(|(k, _)| lspec.attribute(k).is_some())
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            let bbox = geometry.bbox();
            features.push(CachedFeature {
                id: f.id,
                geometry,
                attributes,
                bbox,
            });
        }
        let rects: Vec<Rect> = features.iter().map(|f| f.bbox).collect();
        layers.push(CacheLayer {
            spec: lspec,
            index: PackedRTree::build(&rects),
            features,
            dropped_out_of_zone: dropped,
        });
    }
    let cache = SmartCache {
        path: out.to_path_buf(),
        file_size: 0,
        source_code: w.code().to_string(),
        build_unix: w.metadata().updated_unix,
        spec: spec.clone(),
        layers,
    };
    let bytes = format::encode(&cache);

    let _lock = fsutil::lock_for_write(out)?;
    let identical = match std::fs::read(out) {
        Ok(old) => old == bytes,
        Err(_) => false,
    };
    fsutil::atomic_write(out, &bytes)?;
    Ok(BuildReport {
        path: out.to_path_buf(),
        layers: cache.layers.iter().map(layer_stats).collect(),
        bytes: bytes.len() as u64,
        identical_to_previous: identical,
        build_unix: cache.build_unix,
    })
}

/// Full rebuild with atomic replacement; caches have no incremental update.
pub fn rebuild_from(w: &Warehouse, spec: &CacheSpec, out: &Path) -> Result<BuildReport, CacheError> {
    build_cache(w, spec, out)
}
