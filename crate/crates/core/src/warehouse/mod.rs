//! Per-country vector warehouses.
//!
//! A [`Warehouse`] holds schema-checked layers of [`Feature`]s in geographic
//! WGS84 coordinates with longitudes in `[0, 360)`. The normalization
//! pipeline is `ingest` → `clean_topology` → `merge_sheets` → `validate`;
//! each step returns a [`CleanReport`] or [`ValidationReport`]. Warehouses
//! persist to a single `PIWA1` container file.

mod clean;
mod container;
pub mod geojson;
pub mod geometry;
mod ingest;
mod merge;
pub mod schema;
mod validate;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog;
use crate::geo::{GeoError, GeoPoint};

pub use clean::CleanOptions;
pub use container::{WAREHOUSE_MAGIC, WAREHOUSE_VERSION};
pub use geometry::{Geometry, GeometryKind, Planar};
pub use ingest::IngestOptions;
pub use schema::{AttrType, AttrValue, AttributeSpec, Attributes, Color, LayerSpec, Style, ThemeGroup};
pub use validate::{Check, CheckFailure, ValidationReport};

/// Property that marks pieces of one object split across map sheets.
pub const SHEET_MERGE_KEY: &str = "sheet_merge_key";

#[derive(Debug, Error)]
pub enum WarehouseError {
    #[error("unknown warehouse code '{0}'")]
    UnknownCode(String),
    #[error("duplicate layer name '{0}'")]
    DuplicateLayer(String),
    #[error("invalid layer spec '{0}': {1}")]
    InvalidLayerSpec(String, String),
    #[error("unknown layer '{0}'")]
    UnknownLayer(String),
    #[error("layer '{0}' holds raster imagery; rasters are not stored as features")]
    RasterLayer(String),
    #[error("cannot parse source: {0}")]
    Parse(String),
    #[error("feature {id}: geometry {found} does not match layer '{layer}' ({expected})")]
    KindMismatch {
        layer: String,
        id: u64,
        expected: GeometryKind,
        found: String,
    },
    #[error("not a warehouse file (bad magic)")]
    BadMagic,
    #[error("unsupported warehouse version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt warehouse file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub id: u64,
    pub geometry: Geometry<GeoPoint>,
    pub attributes: Attributes,
}

impl Feature {
    pub fn merge_key(&self) -> Option<&str> {
        match self.attributes.get(SHEET_MERGE_KEY) {
            Some(AttrValue::Text(k)) => Some(k),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    features: BTreeMap<u64, Feature>,
}

impl Layer {
    fn new(spec: LayerSpec) -> Self {
        Layer {
            spec,
            features: BTreeMap::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    /// Features in ascending id order.
    pub fn features(&self) -> impl ExactSizeIterator<Item = &Feature> {
        self.features.values()
    }

    pub fn feature(&self, id: u64) -> Option<&Feature> {
        self.features.get(&id)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    /// Free-text provenance: sources ingested, merges, attribute conflicts.
    pub provenance: Vec<String>,
    /// Seconds since the Unix epoch of the last content change.
    pub updated_unix: u64,
}

/// Counts and rejections from one pipeline step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub features_stored: usize,
    pub duplicate_vertices_removed: usize,
    pub rings_closed: usize,
    pub rings_reoriented: usize,
    pub vertices_snapped: usize,
    pub features_merged: usize,
    pub attributes_dropped: usize,
    pub rejected: Vec<Rejection>,
    /// Merge candidates that could not be joined.
    pub unmerged: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: u64,
    pub reason: String,
}

impl CleanReport {
    /// Number of modifications made to stored geometry or feature sets.
    pub fn changes(&self) -> usize {
        self.duplicate_vertices_removed
            + self.rings_closed
            + self.rings_reoriented
            + self.vertices_snapped
            + self.features_merged
            + self.rejected.len()
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "stored {}, duplicates removed {}, rings closed {}, rings reoriented {}, vertices snapped {}, merged {}, attributes dropped {}, rejected {}",
            self.features_stored,
            self.duplicate_vertices_removed,
            self.rings_closed,
            self.rings_reoriented,
            self.vertices_snapped,
            self.features_merged,
            self.attributes_dropped,
            self.rejected.len()
        );
        if !self.unmerged.is_empty() {
            s.push_str(&format!(", unmerged {}", self.unmerged.len()));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Warehouse {
    code: String,
    layers: Vec<Layer>,
    metadata: Metadata,
}

/// Creates an empty warehouse for a catalog code.
pub fn create_warehouse(code: &str, specs: Vec<LayerSpec>) -> Result<Warehouse, WarehouseError> {
    if !catalog::is_known_code(code) {
        return Err(WarehouseError::UnknownCode(code.to_string()));
    }
    let mut w = Warehouse {
        code: code.to_string(),
        layers: Vec::new(),
        metadata: Metadata::default(),
    };
    for spec in specs {
        w.add_layer(spec)?;
    }
    w.touch();
    Ok(w)
}

impl Warehouse {
    pub fn code(&self) -> &str {
        &self.code
    }

    pub fn metadata(&self) -> &Metadata {
        &self.metadata
    }

    /// Layers in definition order, which is also drawing order.
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, name: &str) -> Result<&Layer, WarehouseError> {
        self.layers
            .iter()
            .find(|l| l.spec.name == name)
            .ok_or_else(|| WarehouseError::UnknownLayer(name.to_string()))
    }

    pub(crate) fn layer_mut(&mut self, name: &str) -> Result<&mut Layer, WarehouseError> {
        self.layers
            .iter_mut()
            .find(|l| l.spec.name == name)
            .ok_or_else(|| WarehouseError::UnknownLayer(name.to_string()))
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec.clone()).collect()
    }

    pub fn add_layer(&mut self, spec: LayerSpec) -> Result<(), WarehouseError> {
        spec.validate()?;
        if self.layers.iter().any(|l| l.spec.name == spec.name) {
            return Err(WarehouseError::DuplicateLayer(spec.name));
        }
        self.layers.push(Layer::new(spec));
        Ok(())
    }

    pub fn feature_count(&self) -> usize {
        self.layers.iter().map(Layer::len).sum()
    }

    pub fn add_provenance(&mut self, note: impl Into<String>) {
        self.metadata.provenance.push(note.into());
    }

    /// Pins the content timestamp, e.g. for reproducible fixtures.
    pub fn set_updated_unix(&mut self, t: u64) {
        self.metadata.updated_unix = t;
    }

    fn touch(&mut self) {
        let now = match std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()) {
            Some(t) => t,
            None => SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        self.metadata.updated_unix = now.max(self.metadata.updated_unix);
    }

    pub fn save(&self, path: &Path) -> Result<(), WarehouseError> {
        container::save(self, path)
    }

    pub fn load(path: &Path) -> Result<Warehouse, WarehouseError> {
        container::load(path)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        container::encode(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Warehouse, WarehouseError> {
        container::decode(bytes)
    }

    /// Ingests a GeoJSON FeatureCollection into `layer`.
    pub fn ingest(&mut self, layer: &str, source: &str, opts: &IngestOptions) -> Result<CleanReport, WarehouseError> {
        ingest::ingest(self, layer, source, opts)
    }

    pub fn ingest_file(&mut self, layer: &str, path: &Path, opts: &IngestOptions) -> Result<CleanReport, WarehouseError> {
        let text = std::fs::read_to_string(path)?;
        let report = ingest::ingest(self, layer, &text, opts)?;
        if report.features_stored > 0 {
            self.add_provenance(format!(
                "{layer}: ingested {} features from {} ({})",
                report.features_stored,
                path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                opts.describe()
            ));
        }
        Ok(report)
    }

    /// Removes duplicate vertices, closes near-closed rings and snaps
    /// near-coincident vertices of different features.
    pub fn clean_topology(&mut self, layer: &str, snap_tol: f64) -> Result<CleanReport, WarehouseError> {
        clean::clean_topology(self, layer, &CleanOptions::new(snap_tol))
    }

    pub fn clean_topology_with(&mut self, layer: &str, opts: &CleanOptions) -> Result<CleanReport, WarehouseError> {
        clean::clean_topology(self, layer, opts)
    }

    /// Joins features sharing a [`SHEET_MERGE_KEY`] across sheet seams.
    pub fn merge_sheets(&mut self, layer: &str, seam_tol: f64) -> Result<CleanReport, WarehouseError> {
        merge::merge_sheets(self, layer, seam_tol)
    }

    pub fn validate(&self) -> ValidationReport {
        validate::validate(self)
    }

    /// Writes `layer` as a GeoJSON FeatureCollection and returns the count.
    pub fn export_layer(&self, layer: &str, path: &Path) -> Result<usize, WarehouseError> {
        let l = self.layer(layer)?;
        let text = geojson::write_collection(l.features());
        std::fs::write(path, text)?;
        Ok(l.len())
    }
}
