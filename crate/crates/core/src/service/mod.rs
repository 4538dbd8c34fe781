//! Map-server operations over a catalog and its caches.
//!
//! Everything here is independent of HTTP; the server crate only parses
//! query strings and maps [`ServiceError`] to status codes. An [`Atlas`]
//! holds immutable cache handles; [`Atlas::reload`] swaps them between
//! requests after a rebuild.

mod bundle;
mod render;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::catalog::{AtlasCatalog, CatalogEntry};
use crate::geo::{geodesic_area, normalize_longitude, path_length, simplify, GeoPoint, ProjectedPoint, Projector};
use crate::smartcache::{open_cache, CacheError, CachedFeature, Rect, SmartCache};
use crate::tolerances;
use crate::warehouse::{Attributes, Geometry, GeometryKind, Style, ThemeGroup};

pub use bundle::{BundleFile, BundleManifest, BundleOptions, BUNDLE_FORMAT};
pub use render::BACKGROUND;

/// The single page served at `/` when no UI bundle is configured.
pub const BUILTIN_INDEX_HTML: &str = include_str!("../../assets/index.html");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    BadRequest,
    NotFound,
    Internal,
}

/// Structured error: a stable `code`, a message and optional detail.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServiceError {
    #[serde(skip)]
    pub kind: ErrorKind,
    pub code: String,
    pub message: String,
    pub detail: Value,
}

impl std::fmt::Display for ServiceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ServiceError {}

impl ServiceError {
    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        ServiceError {
            kind: ErrorKind::BadRequest,
            code: code.to_string(),
            message: message.into(),
            detail: Value::Null,
        }
    }

    pub fn not_found(code: &str, message: impl Into<String>) -> Self {
        ServiceError {
            kind: ErrorKind::NotFound,
            ..Self::bad_request(code, message)
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ServiceError {
            kind: ErrorKind::Internal,
            ..Self::bad_request("internal", message)
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    /// HTTP status for this error.
    pub fn status(&self) -> u16 {
        match self.kind {
            ErrorKind::BadRequest => 400,
            ErrorKind::NotFound => 404,
            ErrorKind::Internal => 500,
        }
    }
}

impl From<CacheError> for ServiceError {
    fn from(e: CacheError) -> Self {
        match e {
            CacheError::UnknownLayer(l) => ServiceError::not_found("unknown_layer", format!("unknown layer '{l}'")),
            CacheError::InvalidQuery(m) => ServiceError::bad_request("invalid_query", m),
            other => ServiceError::internal(other.to_string()),
        }
    }
}

/// Numeric conventions, overridable from the config file or CLI flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceSettings {
    pub reference_pixel_m: f64,
    pub simplify_per_scale_m: f64,
    pub min_scale_denom: f64,
    pub max_scale_denom: f64,
    pub link_bandwidth_bps: f64,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        ServiceSettings {
            reference_pixel_m: tolerances::REFERENCE_PIXEL_M,
            simplify_per_scale_m: tolerances::SIMPLIFY_PER_SCALE_M,
            min_scale_denom: tolerances::MIN_SCALE_DENOM,
            max_scale_denom: tolerances::MAX_SCALE_DENOM,
            link_bandwidth_bps: tolerances::LINK_BANDWIDTH_BPS,
        }
    }
}

impl ServiceSettings {
    pub fn clamp_scale(&self, s: f64) -> f64 {
        s.clamp(self.min_scale_denom, self.max_scale_denom)
    }

    pub fn simplify_tolerance_m(&self, scale: f64) -> f64 {
        self.simplify_per_scale_m * scale
    }

    pub fn pixels_to_meters(&self, px: f64, scale: f64) -> f64 {
        px * self.reference_pixel_m * scale
    }
}

/// Server configuration, read from TOML. Relative paths are resolved
/// against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtlasConfig {
    /// Catalog JSON; the built-in catalog when absent.
    #[serde(default)]
    pub catalog: Option<PathBuf>,
    /// Root against which catalog warehouse and cache paths resolve.
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    #[serde(default = "default_listen")]
    pub listen: String,
    /// UI assets served at `/`.
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
    #[serde(default)]
    pub settings: ServiceSettings,
}

fn default_data_dir() -> PathBuf {
    PathBuf::from(".")
}

fn default_listen() -> String {
    "127.0.0.1:8080".to_string()
}

impl AtlasConfig {
    pub fn for_data_dir(dir: &Path) -> AtlasConfig {
        AtlasConfig {
            catalog: None,
            data_dir: dir.to_path_buf(),
            listen: default_listen(),
            static_dir: None,
            settings: ServiceSettings::default(),
        }
    }

    pub fn parse(text: &str, base: &Path) -> Result<AtlasConfig, ServiceError> {
        let mut c: AtlasConfig =
            toml::from_str(text).map_err(|e| ServiceError::bad_request("invalid_config", e.to_string()))?;
        let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        c.catalog = c.catalog.as_ref().map(resolve);
        c.data_dir = resolve(&c.data_dir);
        c.static_dir = c.static_dir.as_ref().map(resolve);
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<AtlasConfig, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ServiceError::not_found("config_missing", format!("cannot read config {}: {e}", path.display()))
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }
}

/// Planar (cache CRS) or geographic (degrees) bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BboxCrs {
    #[default]
    Geographic,
    Planar,
}

impl std::str::FromStr for BboxCrs {
    type Err = ServiceError;
    fn from_str(s: &str) -> Result<Self, ServiceError> {
        match s {
            "geographic" => Ok(BboxCrs::Geographic),
            "planar" => Ok(BboxCrs::Planar),
            _ => Err(ServiceError::bad_request("invalid_crs", format!("crs must be 'geographic' or 'planar', got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapRequest {
    pub code: String,
    pub bbox: Rect,
    pub bbox_crs: BboxCrs,
    pub width: u32,
    pub height: u32,
    /// `None` draws every published layer.
    pub layers: Option<Vec<String>>,
    /// `None` derives the scale from the bbox and image width.
    pub scale_denom: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapImage {
    pub png: Vec<u8>,
    pub width: u32,
    pub height: u32,
    pub scale_denom: f64,
    /// Layers actually drawn, in drawing order.
    pub layers: Vec<String>,
    /// Planar extent of the image after aspect reconciliation.
    pub bbox: Rect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRequest {
    pub code: String,
    pub layer: String,
    pub bbox: Rect,
    pub bbox_crs: BboxCrs,
    /// Defaults to the entry's base scale.
    pub scale_denom: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureResponse {
    /// GeoJSON FeatureCollection text.
    pub body: String,
    pub count: usize,
    pub scale_denom: f64,
    pub payload_bytes: usize,
    /// Estimated transfer time over the budgeted link.
    pub transfer_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifyRequest {
    pub code: String,
    pub lon: f64,
    pub lat: f64,
    pub tolerance_px: f64,
    pub scale_denom: Option<f64>,
    /// `None` queries every layer visible at the scale.
    pub layers: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifyHit {
    pub layer: String,
    pub id: u64,
    pub distance_m: f64,
    pub attributes: Attributes,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifyResponse {
    pub scale_denom: f64,
    pub tolerance_m: f64,
    pub hits: Vec<IdentifyHit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitKind {
    Country,
    Site,
    Theme,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchHit {
    pub kind: HitKind,
    /// Warehouse to open.
    pub code: String,
    pub country: String,
    /// The matched name: country, site or theme group.
    pub name: String,
    /// Zoom target in degrees, longitudes in `[0, 360)`.
    pub bbox: [f64; 4],
    pub scale_denom: u32,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub layers: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureMode {
    Distance,
    Area,
}

impl std::str::FromStr for MeasureMode {
    type Err = ServiceError;
    fn from_str(s: &str) -> Result<Self, ServiceError> {
        match s {
            "distance" => Ok(MeasureMode::Distance),
            "area" => Ok(MeasureMode::Area),
            _ => Err(ServiceError::bad_request("invalid_mode", format!("mode must be 'distance' or 'area', got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measurement {
    pub mode: MeasureMode,
    pub value: f64,
    pub unit: &'static str,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LegendEntry {
    pub name: String,
    pub geometry_kind: GeometryKind,
    pub min_scale_denom: f64,
    pub max_scale_denom: f64,
    pub visible: bool,
    pub swatch: Style,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LegendGroup {
    pub group: ThemeGroup,
    pub layers: Vec<LegendEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Legend {
    pub code: String,
    pub scale_denom: f64,
    pub groups: Vec<LegendGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReloadReport {
    pub loaded: Vec<String>,
    pub missing: Vec<String>,
}

/// Catalog plus open caches.
#[derive(Debug)]
pub struct Atlas {
    config: AtlasConfig,
    catalog: AtlasCatalog,
    caches: RwLock<BTreeMap<String, Arc<SmartCache>>>,
}

fn valid_rect(r: &Rect) -> bool {
    r.iter().all(|v| v.is_finite()) && r[0] < r[2] && r[1] < r[3]
}

/// Normalizes a geographic box so `min_lon` is in `[0, 360)` and
/// `max_lon > min_lon`, possibly beyond 360 when it crosses 0°.
fn normalize_geo_bbox(b: &Rect) -> Result<Rect, ServiceError> {
    let bad = || ServiceError::bad_request("invalid_bbox", format!("bbox {b:?} is degenerate or out of range"));
    if !b.iter().all(|v| v.is_finite()) || !(b[1] < b[3]) || b[1] < -90.0 || b[3] > 90.0 {
        return Err(bad());
    }
    let w = b[2] - b[0];
    if w == 0.0 {
        return Err(bad());
    }
    let min = normalize_longitude(b[0]).map_err(|_| bad())?;
    let w = if w > 0.0 && w <= 360.0 { w } else { w.rem_euclid(360.0) };
    if w == 0.0 {
        return Err(bad());
    }
    Ok([min, b[1], min + w, b[3]])
}

fn round7(v: f64) -> f64 {
    (v * 1e7).round() / 1e7
}

/// Geographic output coordinate with longitude kept in `[0, 360)`.
fn geo_json(p: &GeoPoint) -> Value {
    let mut lon = round7(p.lon());
    if lon >= 360.0 {
        lon -= 360.0;
    }
    json!([lon, round7(p.lat())])
}

/// Douglas–Peucker per part; rings that would collapse stay unsimplified.
pub fn simplify_geometry(g: &Geometry<ProjectedPoint>, tol: f64) -> Geometry<ProjectedPoint> {
    let ring = |r: &Vec<ProjectedPoint>| {
        let s = simplify(r, tol);
        if s.len() >= 4 {
            s
        } else {
            r.clone()
        }
    };
    match g {
        Geometry::Point(p) => Geometry::Point(*p),
        Geometry::PolyLine(v) => Geometry::PolyLine(simplify(v, tol)),
        Geometry::Polygon(rs) => Geometry::Polygon(rs.iter().map(ring).collect()),
        Geometry::MultiPolygon(ps) => Geometry::MultiPolygon(ps.iter().map(|rs| rs.iter().map(ring).collect()).collect()),
    }
}

impl Atlas {
    pub fn open(config: AtlasConfig) -> Result<Atlas, ServiceError> {
        let catalog = match &config.catalog {
            Some(p) => AtlasCatalog::load(p).map_err(|e| ServiceError::bad_request("invalid_catalog", e.to_string()))?,
            None => AtlasCatalog::builtin(),
        };
        let atlas = Atlas {
            config,
            catalog,
            caches: RwLock::new(BTreeMap::new()),
        };
        atlas.reload()?;
        Ok(atlas)
    }

    pub fn config(&self) -> &AtlasConfig {
        &self.config
    }

    pub fn settings(&self) -> &ServiceSettings {
        &self.config.settings
    }

    pub fn catalog(&self) -> &AtlasCatalog {
        &self.catalog
    }

    pub fn cache_path(&self, e: &CatalogEntry) -> PathBuf {
        self.config.data_dir.join(&e.cache_path)
    }

    pub fn warehouse_path(&self, e: &CatalogEntry) -> PathBuf {
        self.config.data_dir.join(&e.warehouse_path)
    }

    /// Reopens every cache file and swaps the whole set at once.
    pub fn reload(&self) -> Result<ReloadReport, ServiceError> {
        let mut fresh = BTreeMap::new();
        let mut report = ReloadReport {
            loaded: Vec::new(),
            missing: Vec::new(),
        };
        for e in self.catalog.entries() {
            let path = self.cache_path(e);
            if !path.exists() {
                report.missing.push(e.code.clone());
                continue;
            }
            let cache = open_cache(&path).map_err(|err| {
                ServiceError::internal(format!("cannot open cache {}: {err}", path.display()))
            })?;
            fresh.insert(e.code.clone(), Arc::new(cache));
            report.loaded.push(e.code.clone());
        }
        *self.caches.write().map_err(|_| ServiceError::internal("cache table poisoned"))? = fresh;
        Ok(report)
    }

    pub fn entry(&self, code: &str) -> Result<&CatalogEntry, ServiceError> {
        self.catalog
            .entry(code)
            .ok_or_else(|| ServiceError::not_found("unknown_warehouse", format!("unknown warehouse '{code}'")))
    }

    pub fn cache(&self, code: &str) -> Result<Arc<SmartCache>, ServiceError> {
        self.entry(code)?;
        self.caches
            .read()
            .map_err(|_| ServiceError::internal("cache table poisoned"))?
            .get(code)
            .cloned()
            .ok_or_else(|| ServiceError::not_found("cache_missing", format!("no cache has been built for '{code}'")))
    }

    /// Codes with an open cache, in catalog order.
    pub fn loaded_codes(&self) -> Vec<String> {
        let caches = self.caches.read().map(|c| c.keys().cloned().collect::<Vec<_>>()).unwrap_or_default();
        self.catalog
            .entries()
            .filter(|e| caches.contains(&e.code))
            .map(|e| e.code.clone())
            .collect()
    }

    fn scale_or_base(&self, code: &str, s: Option<f64>) -> Result<f64, ServiceError> {
        match s {
            Some(v) if v.is_finite() && v > 0.0 => Ok(self.settings().clamp_scale(v)),
            Some(v) => Err(ServiceError::bad_request("invalid_scale", format!("scale {v} must be positive"))),
            None => Ok(self.settings().clamp_scale(self.entry(code)?.base_scale_denom as f64)),
        }
    }

    /// Projects a box into the cache CRS by sampling its edges.
    fn planar_bbox(projector: &Projector, b: &Rect, crs: BboxCrs) -> Result<Rect, ServiceError> {
        if crs == BboxCrs::Planar {
            if !valid_rect(b) {
                return Err(ServiceError::bad_request("invalid_bbox", format!("bbox {b:?} is degenerate")));
            }
            return Ok(*b);
        }
        let g = normalize_geo_bbox(b)?;
        let mut out = crate::smartcache::index::EMPTY_RECT;
        const N: usize = 8;
        for i in 0..=N {
            let t = i as f64 / N as f64;
            let lon = g[0] + (g[2] - g[0]) * t;
            let lat = g[1] + (g[3] - g[1]) * t;
            for (x, y) in [(lon, g[1]), (lon, g[3]), (g[0], lat), (g[2], lat)] {
                let p = GeoPoint::new(x, y)
                    .and_then(|p| projector.forward(&p))
                    .map_err(|e| ServiceError::bad_request("bbox_outside_projection", e.to_string()))?;
                out = [out[0].min(p.x()), out[1].min(p.y()), out[2].max(p.x()), out[3].max(p.y())];
            }
        }
        Ok(out)
    }

    fn check_layers(cache: &SmartCache, requested: &Option<Vec<String>>) -> Result<(), ServiceError> {
        if let Some(ls) = requested {
            for l in ls {
                cache.layer(l)?;
            }
        }
        Ok(())
    }

    pub fn render_map(&self, req: &MapRequest) -> Result<MapImage, ServiceError> {
        let range = tolerances::MIN_IMAGE_PX..=tolerances::MAX_IMAGE_PX;
        if !range.contains(&req.width) || !range.contains(&req.height) {
            return Err(ServiceError::bad_request(
                "invalid_size",
                format!("image size {}x{} outside [{}, {}]", req.width, req.height, range.start(), range.end()),
            ));
        }
        let cache = self.cache(&req.code)?;
        Self::check_layers(&cache, &req.layers)?;
        let projector = cache.projection().projector();
        let mut b = Self::planar_bbox(&projector, &req.bbox, req.bbox_crs)?;

        // Expand the short axis so the box has the pixel aspect.
        let (w, h) = (b[2] - b[0], b[3] - b[1]);
        let aspect = req.width as f64 / req.height as f64;
        if w / h < aspect {
            let nw = h * aspect;
            let cx = (b[0] + b[2]) / 2.0;
            b = [cx - nw / 2.0, b[1], cx + nw / 2.0, b[3]];
        } else {
            let nh = w / aspect;
            let cy = (b[1] + b[3]) / 2.0;
            b = [b[0], cy - nh / 2.0, b[2], cy + nh / 2.0];
        }
        let settings = self.settings();
        let scale = match req.scale_denom {
            Some(_) => self.scale_or_base(&req.code, req.scale_denom)?,
            None => settings.clamp_scale((b[2] - b[0]) / (req.width as f64 * settings.reference_pixel_m)),
        };
        let layers: Vec<_> = cache
            .layers()
            .iter()
            .filter(|l| req.layers.as_ref().is_none_or(|ls| ls.contains(&l.spec().name)))
            .filter(|l| l.spec().visible_at(scale))
            .collect();
        let png = render::draw(&cache, &layers, &b, req.width, req.height, settings.simplify_tolerance_m(scale))?;
        Ok(MapImage {
            png,
            width: req.width,
            height: req.height,
            scale_denom: scale,
            layers: layers.iter().map(|l| l.spec().name.clone()).collect(),
            bbox: b,
        })
    }

    pub fn get_features(&self, req: &FeatureRequest) -> Result<FeatureResponse, ServiceError> {
        let cache = self.cache(&req.code)?;
        let projector = cache.projection().projector();
        let scale = self.scale_or_base(&req.code, req.scale_denom)?;
        let b = Self::planar_bbox(&projector, &req.bbox, req.bbox_crs)?;
        let tol = self.settings().simplify_tolerance_m(scale);
        let hits = cache.query_bbox(&req.layer, &b)?;
        let mut features = Vec::with_capacity(hits.len());
        for f in &hits {
            features.push(feature_json(f, &simplify_geometry(&f.geometry, tol), &projector)?);
        }
        let body = serde_json::to_string(&json!({
            "type": "FeatureCollection",
            "layer": req.layer,
            "scale_denom": scale,
            "features": features,
        }))
        .map_err(|e| ServiceError::internal(e.to_string()))?;
        let bytes = body.len();
        Ok(FeatureResponse {
            count: hits.len(),
            scale_denom: scale,
            payload_bytes: bytes,
            transfer_seconds: bytes as f64 * 8.0 / self.settings().link_bandwidth_bps,
            body,
        })
    }

    pub fn identify(&self, req: &IdentifyRequest) -> Result<IdentifyResponse, ServiceError> {
        if !(req.tolerance_px.is_finite() && req.tolerance_px >= 1.0) {
            return Err(ServiceError::bad_request(
                "invalid_tolerance",
                format!("tolerance_px {} must be at least 1", req.tolerance_px),
            ));
        }
        let cache = self.cache(&req.code)?;
        Self::check_layers(&cache, &req.layers)?;
        let scale = self.scale_or_base(&req.code, req.scale_denom)?;
        let tol = self.settings().pixels_to_meters(req.tolerance_px, scale);
        let p = GeoPoint::new(req.lon, req.lat)
            .map_err(|e| ServiceError::bad_request("invalid_point", e.to_string()))?;
        let q = cache
            .projection()
            .projector()
            .forward(&p)
            .map_err(|e| ServiceError::bad_request("point_outside_projection", e.to_string()))?;
        let mut hits = Vec::new();
        for l in cache.layers() {
            let name = &l.spec().name;
            let wanted = match &req.layers {
                Some(ls) => ls.contains(name),
                None => l.spec().visible_at(scale),
            };
            if !wanted {
                continue;
            }
            for h in cache.query_point(name, &q, tol)? {
                hits.push(IdentifyHit {
                    layer: name.clone(),
                    id: h.feature.id,
                    distance_m: h.distance,
                    attributes: h.feature.attributes.clone(),
                });
            }
        }
        Ok(IdentifyResponse {
            scale_denom: scale,
            tolerance_m: tol,
            hits,
        })
    }

    /// Case-insensitive substring search over countries, sites and theme
    /// groups, in catalog order.
    pub fn search(&self, q: &str) -> Result<Vec<SearchHit>, ServiceError> {
        let needle = q.trim().to_lowercase();
        if needle.is_empty() {
            return Err(ServiceError::bad_request("query_required", "search text is required"));
        }
        let matches = |s: &str| s.to_lowercase().contains(&needle);
        let mut hits = Vec::new();
        for e in self.catalog.entries() {
            let hit = |kind, name: &str, bbox: [f64; 4], layers: Vec<String>| SearchHit {
                kind,
                code: e.code.clone(),
                country: e.name.clone(),
                name: name.to_string(),
                bbox,
                scale_denom: e.base_scale_denom,
                layers,
            };
            if matches(&e.name) || matches(&e.code) {
                hits.push(hit(HitKind::Country, &e.name, e.extent, vec![]));
            }
            for s in e.sites.iter().filter(|s| !s.whole_country && matches(&s.name)) {
                hits.push(hit(HitKind::Site, &s.name, s.bbox, vec![]));
            }
        }
        let caches = self.caches.read().map_err(|_| ServiceError::internal("cache table poisoned"))?;
        for g in ThemeGroup::ALL.iter().filter(|g| matches(g.as_str()) || matches(&g.as_str().replace('-', " "))) {
            for e in self.catalog.entries() {
                let Some(c) = caches.get(&e.code) else { continue };
                let layers: Vec<String> = c
                    .layers()
                    .iter()
                    .filter(|l| l.spec().theme_group == *g)
                    .map(|l| l.spec().name.clone())
                    .collect();
                if !layers.is_empty() {
                    hits.push(SearchHit {
                        kind: HitKind::Theme,
                        code: e.code.clone(),
                        country: e.name.clone(),
                        name: g.as_str().to_string(),
                        bbox: e.extent,
                        scale_denom: e.base_scale_denom,
                        layers,
                    });
                }
            }
        }
        Ok(hits)
    }

    pub fn legend(&self, code: &str, scale_denom: Option<f64>) -> Result<Legend, ServiceError> {
        let cache = self.cache(code)?;
        let scale = self.scale_or_base(code, scale_denom)?;
        let groups = ThemeGroup::ALL
            .iter()
            .map(|g| LegendGroup {
                group: *g,
                layers: cache
                    .layers()
                    .iter()
                    .map(|l| l.spec())
                    .filter(|s| s.theme_group == *g)
                    .map(|s| LegendEntry {
                        name: s.name.clone(),
                        geometry_kind: s.geometry_kind,
                        min_scale_denom: s.min_scale_denom,
                        max_scale_denom: s.max_scale_denom,
                        visible: s.visible_at(scale),
                        swatch: s.style.clone(),
                    })
                    .collect(),
            })
            .filter(|g: &LegendGroup| !g.layers.is_empty())
            .collect();
        Ok(Legend {
            code: code.to_string(),
            scale_denom: scale,
            groups,
        })
    }

    pub fn export_offline_bundle(&self, out: &Path, opts: &BundleOptions) -> Result<BundleManifest, ServiceError> {
        bundle::export(self, out, opts)
    }
}

/// Great-circle length of a path, or the area enclosed by a ring that is
/// closed automatically.
pub fn measure(path: &[GeoPoint], mode: MeasureMode) -> Result<Measurement, ServiceError> {
    if path.is_empty() {
        return Err(ServiceError::bad_request("path_required", "at least one point is required"));
    }
    let value = match mode {
        MeasureMode::Distance => path_length(path),
        MeasureMode::Area => {
            let mut ring = path.to_vec();
            if ring.first() != ring.last() {
                ring.push(ring[0]);
            }
            if ring.len() < 4 {
                return Err(ServiceError::bad_request("path_too_short", "an area needs at least three points"));
            }
            geodesic_area(&ring).map_err(|e| ServiceError::bad_request("invalid_path", e.to_string()))?
        }
    };
    Ok(Measurement {
        mode,
        value,
        unit: match mode {
            MeasureMode::Distance => "m",
            MeasureMode::Area => "m2",
        },
        points: path.len(),
    })
}

fn feature_json(f: &CachedFeature, g: &Geometry<ProjectedPoint>, projector: &Projector) -> Result<Value, ServiceError> {
    let inv = |p: &ProjectedPoint| {
        projector
            .inverse(p)
            .map(|q| geo_json(&q))
            .map_err(|e| ServiceError::internal(format!("feature {}: {e}", f.id)))
    };
    let line = |v: &Vec<ProjectedPoint>| v.iter().map(inv).collect::<Result<Vec<_>, _>>();
    let rings = |rs: &Vec<Vec<ProjectedPoint>>| rs.iter().map(line).collect::<Result<Vec<_>, _>>();
    let geometry = match g {
        Geometry::Point(p) => json!({"type": "Point", "coordinates": inv(p)?}),
        Geometry::PolyLine(v) => json!({"type": "LineString", "coordinates": line(v)?}),
        Geometry::Polygon(rs) => json!({"type": "Polygon", "coordinates": rings(rs)?}),
        Geometry::MultiPolygon(ps) => json!({
            "type": "MultiPolygon",
            "coordinates": ps.iter().map(rings).collect::<Result<Vec<_>, _>>()?,
        }),
    };
    Ok(json!({"type": "Feature", "id": f.id, "geometry": geometry, "properties": f.attributes}))
}
