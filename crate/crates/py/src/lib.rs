//! Python bindings: projections, control-point fits, warehouses, caches and
//! the atlas service.
//!
//! Structured results (reports, legends, search hits) come back as plain
//! Python dicts and lists built from their JSON form.

use std::path::PathBuf;
use std::str::FromStr;

use atlas_core::catalog::AtlasCatalog;
use atlas_core::fixtures;
use atlas_core::geo::{self, AffineTransform, ControlPointPair, DatumShift, GeoPoint, ProjectedPoint, ProjectionSpec, SourceCrs};
use atlas_core::service::{self, Atlas, AtlasConfig, BboxCrs, BundleOptions, MeasureMode};
use atlas_core::smartcache::{self, CacheSpec, SmartCache};
use atlas_core::tolerances::{DEFAULT_SEAM_TOL_DEG, DEFAULT_SNAP_TOL_DEG};
use atlas_core::warehouse::{self, GeometryKind, IngestOptions, LayerSpec};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use serde::Serialize;

create_exception!(pacific_atlas, AtlasError, PyException, "Raised for data, cache and service failures.");

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn atlas_err(e: impl std::fmt::Display) -> PyErr {
    AtlasError::new_err(e.to_string())
}

fn service_err(e: service::ServiceError) -> PyErr {
    if e.status() == 400 {
        value_err(e)
    } else {
        atlas_err(e)
    }
}

/// Converts through JSON so nested reports arrive as dicts and lists.
fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(atlas_err)?;
    from_json(py, &text)
}

fn from_json(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn geo_point(lon: f64, lat: f64) -> PyResult<GeoPoint> {
    GeoPoint::new(lon, lat).map_err(value_err)
}

fn planar(x: f64, y: f64) -> PyResult<ProjectedPoint> {
    ProjectedPoint::new(x, y).map_err(value_err)
}

/// A planar projection parsed from its textual spec, for example
/// `tm:cm=183,lat0=0,k=0.9996,fe=500000,fn=10000000,ell=wgs84`.
#[pyclass(frozen, module = "pacific_atlas")]
struct Projection {
    spec: ProjectionSpec,
}

#[pymethods]
impl Projection {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(Projection {
            spec: ProjectionSpec::from_str(spec).map_err(value_err)?,
        })
    }

    /// UTM zone `zone` in the given hemisphere on WGS84.
    #[staticmethod]
    #[pyo3(signature = (zone, south = true))]
    fn utm(zone: u8, south: bool) -> PyResult<Self> {
        let s = format!("utm:{zone}{}", if south { 's' } else { 'n' });
        let crs = SourceCrs::from_str(&s).map_err(value_err)?;
        match crs {
            SourceCrs::Projected(spec) => Ok(Projection { spec }),
            _ => Err(value_err(format!("{s} is not a projected CRS"))),
        }
    }

    #[getter]
    fn central_meridian(&self) -> f64 {
        self.spec.central_meridian()
    }

    fn forward(&self, lon: f64, lat: f64) -> PyResult<(f64, f64)> {
        let p = geo::tm_forward(&self.spec, &geo_point(lon, lat)?).map_err(value_err)?;
        Ok((p.x(), p.y()))
    }

    /// Returns `(lon, lat)` with the longitude in `[0, 360)`.
    fn inverse(&self, x: f64, y: f64) -> PyResult<(f64, f64)> {
        let g = geo::tm_inverse(&self.spec, &planar(x, y)?).map_err(value_err)?;
        Ok((g.lon(), g.lat()))
    }

    fn __str__(&self) -> String {
        self.spec.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Projection('{}')", self.spec)
    }
}

/// Wraps a longitude into `[0, 360)`.
#[pyfunction]
fn normalize_longitude(lon: f64) -> PyResult<f64> {
    geo::normalize_longitude(lon).map_err(value_err)
}

/// Converts a point on a source datum to WGS84. `crs` names the source
/// ellipsoid as in `geographic:ell=intl1924`; `shift` is a Helmert spec
/// `shift:dx,dy,dz[,rx,ry,rz,ppm]`.
#[pyfunction]
#[pyo3(signature = (lon, lat, h = 0.0, crs = "geographic", shift = None))]
fn to_wgs84(lon: f64, lat: f64, h: f64, crs: &str, shift: Option<&str>) -> PyResult<(f64, f64, f64)> {
    let crs = SourceCrs::from_str(crs).map_err(value_err)?;
    let shift = match shift {
        Some(s) => DatumShift::from_str(s).map_err(value_err)?,
        None => DatumShift::default(),
    };
    let p = GeoPoint::with_height(lon, lat, h).map_err(value_err)?;
    let out = geo::datum_transform(&crs.ellipsoid(), &shift, &p).map_err(value_err)?;
    Ok((out.lon(), out.lat(), out.h()))
}

/// Least-squares affine fit from `[((sx, sy), (tx, ty)), ...]`. Returns a
/// dict with the spec string, the six coefficients, residuals and rms.
#[pyfunction]
fn fit_affine(py: Python<'_>, pairs: Vec<((f64, f64), (f64, f64))>) -> PyResult<Py<PyAny>> {
    let pairs = pairs
        .iter()
        .map(|&((sx, sy), (tx, ty))| {
            Ok(ControlPointPair {
                source: planar(sx, sy)?,
                target: planar(tx, ty)?,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    let fit = geo::fit_affine(&pairs).map_err(value_err)?;
    to_py(
        py,
        &serde_json::json!({
            "affine": fit.transform.to_string(),
            "coefficients": fit.transform.coefficients(),
            "residuals_m": fit.residuals,
            "rms_m": fit.rms,
        }),
    )
}

/// Applies an affine spec such as `affine:1,0,0,0,1,0` to a planar point.
#[pyfunction]
fn apply_affine(spec: &str, x: f64, y: f64) -> PyResult<(f64, f64)> {
    let t = AffineTransform::from_str(spec).map_err(value_err)?;
    let p = t.apply(&planar(x, y)?).map_err(value_err)?;
    Ok((p.x(), p.y()))
}

fn measure_path(path: Vec<(f64, f64)>, mode: MeasureMode) -> PyResult<f64> {
    let pts = path.iter().map(|&(lon, lat)| geo_point(lon, lat)).collect::<PyResult<Vec<_>>>()?;
    Ok(service::measure(&pts, mode).map_err(service_err)?.value)
}

/// Great-circle length of a `[(lon, lat), ...]` path in meters.
#[pyfunction]
fn distance(path: Vec<(f64, f64)>) -> PyResult<f64> {
    measure_path(path, MeasureMode::Distance)
}

/// Spherical area of a ring in square meters; the ring may be left open.
#[pyfunction]
fn area(ring: Vec<(f64, f64)>) -> PyResult<f64> {
    measure_path(ring, MeasureMode::Area)
}

/// An authoritative per-country vector store.
#[pyclass(module = "pacific_atlas")]
struct Warehouse {
    inner: warehouse::Warehouse,
}

#[pymethods]
impl Warehouse {
    /// Creates an empty warehouse from a JSON list of layer specs.
    #[staticmethod]
    fn create(code: &str, layers_json: &str) -> PyResult<Self> {
        let specs: Vec<LayerSpec> = serde_json::from_str(layers_json).map_err(value_err)?;
        Ok(Warehouse {
            inner: warehouse::create_warehouse(code, specs).map_err(atlas_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Warehouse {
            inner: warehouse::Warehouse::load(&path).map_err(atlas_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(atlas_err)
    }

    #[getter]
    fn code(&self) -> String {
        self.inner.code().to_string()
    }

    #[getter]
    fn layer_names(&self) -> Vec<String> {
        self.inner.layers().iter().map(|l| l.name().to_string()).collect()
    }

    fn feature_count(&self) -> usize {
        self.inner.feature_count()
    }

    /// Ingests GeoJSON text into `layer` and returns the ingest report.
    #[pyo3(signature = (layer, geojson, crs = "geographic", shift = None, affine = None))]
    fn ingest(
        &mut self,
        py: Python<'_>,
        layer: &str,
        geojson: &str,
        crs: &str,
        shift: Option<&str>,
        affine: Option<&str>,
    ) -> PyResult<Py<PyAny>> {
        let opts = IngestOptions {
            crs: SourceCrs::from_str(crs).map_err(value_err)?,
            shift: shift.map(DatumShift::from_str).transpose().map_err(value_err)?,
            affine: affine.map(AffineTransform::from_str).transpose().map_err(value_err)?,
        };
        let report = self.inner.ingest(layer, geojson, &opts).map_err(atlas_err)?;
        to_py(py, &report)
    }

    /// Cleans one layer, or every vector layer, and returns the total
    /// number of changes.
    #[pyo3(signature = (layer = None, snap_tol = DEFAULT_SNAP_TOL_DEG))]
    fn clean(&mut self, layer: Option<&str>, snap_tol: f64) -> PyResult<usize> {
        let mut changes = 0;
        for name in self.targets(layer)? {
            changes += self.inner.clean_topology(&name, snap_tol).map_err(atlas_err)?.changes();
        }
        Ok(changes)
    }

    /// Joins split sheets and returns the number of merges.
    #[pyo3(signature = (layer = None, seam_tol = DEFAULT_SEAM_TOL_DEG))]
    fn merge(&mut self, layer: Option<&str>, seam_tol: f64) -> PyResult<usize> {
        let mut merged = 0;
        for name in self.targets(layer)? {
            merged += self.inner.merge_sheets(&name, seam_tol).map_err(atlas_err)?.features_merged;
        }
        Ok(merged)
    }

    fn validate(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let report = self.inner.validate();
        let mut v = serde_json::to_value(&report).map_err(atlas_err)?;
        v["ok"] = report.is_ok().into();
        to_py(py, &v)
    }

    /// Writes `layer` as GeoJSON and returns the feature count.
    fn export_layer(&self, layer: &str, path: PathBuf) -> PyResult<usize> {
        self.inner.export_layer(layer, &path).map_err(atlas_err)
    }

    fn __repr__(&self) -> String {
        format!("Warehouse('{}', {} features)", self.inner.code(), self.inner.feature_count())
    }
}

impl Warehouse {
    fn targets(&self, layer: Option<&str>) -> PyResult<Vec<String>> {
        match layer {
            Some(l) => {
                self.inner.layer(l).map_err(atlas_err)?;
                Ok(vec![l.to_string()])
            }
            None => Ok(self
                .inner
                .layer_specs()
                .into_iter()
                .filter(|s| s.geometry_kind != GeometryKind::Image)
                .map(|s| s.name)
                .collect()),
        }
    }
}

/// A read-only projected cache.
#[pyclass(frozen, module = "pacific_atlas")]
struct Cache {
    inner: SmartCache,
}

#[pymethods]
impl Cache {
    /// Builds a cache of every vector layer and returns the build report.
    #[staticmethod]
    fn build(py: Python<'_>, warehouse: &Warehouse, path: PathBuf, projection: &Projection, base_scale_denom: u32) -> PyResult<Py<PyAny>> {
        let spec = CacheSpec::all_vector_layers(&warehouse.inner, projection.spec, base_scale_denom);
        let report = smartcache::build_cache(&warehouse.inner, &spec, &path).map_err(atlas_err)?;
        to_py(py, &report)
    }

    #[staticmethod]
    fn open(path: PathBuf) -> PyResult<Self> {
        Ok(Cache {
            inner: smartcache::open_cache(&path).map_err(atlas_err)?,
        })
    }

    #[getter]
    fn layer_names(&self) -> Vec<String> {
        self.inner.layers().iter().map(|l| l.spec().name.clone()).collect()
    }

    #[getter]
    fn projection(&self) -> Projection {
        Projection {
            spec: *self.inner.projection(),
        }
    }

    /// Ids of features meeting a planar `(minx, miny, maxx, maxy)` box.
    fn query_bbox(&self, layer: &str, bbox: [f64; 4]) -> PyResult<Vec<u64>> {
        Ok(self.inner.query_bbox(layer, &bbox).map_err(atlas_err)?.iter().map(|f| f.id).collect())
    }

    /// `(id, distance)` pairs within `tolerance` meters, nearest first.
    fn query_point(&self, layer: &str, x: f64, y: f64, tolerance: f64) -> PyResult<Vec<(u64, f64)>> {
        let hits = self.inner.query_point(layer, &planar(x, y)?, tolerance).map_err(atlas_err)?;
        Ok(hits.iter().map(|h| (h.feature.id, h.distance)).collect())
    }

    fn stats(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.stats())
    }
}

fn bbox_crs(crs: &str) -> PyResult<BboxCrs> {
    BboxCrs::from_str(crs).map_err(service_err)
}

/// The map service over a data directory: the same operations the HTTP API
/// exposes.
#[pyclass(frozen, name = "Atlas", module = "pacific_atlas")]
struct PyAtlas {
    inner: Atlas,
}

#[pymethods]
impl PyAtlas {
    /// Opens from an `atlas.toml`.
    #[staticmethod]
    fn open(config: PathBuf) -> PyResult<Self> {
        let config = AtlasConfig::load(&config).map_err(service_err)?;
        Ok(PyAtlas {
            inner: Atlas::open(config).map_err(service_err)?,
        })
    }

    /// Opens a data directory laid out with the catalog's default paths.
    #[staticmethod]
    fn from_data_dir(dir: PathBuf) -> PyResult<Self> {
        Ok(PyAtlas {
            inner: Atlas::open(AtlasConfig::for_data_dir(&dir)).map_err(service_err)?,
        })
    }

    fn countries(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, self.inner.catalog())
    }

    fn loaded_codes(&self) -> Vec<String> {
        self.inner.loaded_codes()
    }

    /// Returns `(png_bytes, info)` where info holds the scale, drawn layers
    /// and planar extent.
    #[pyo3(signature = (code, bbox, width, height, layers = None, scale_denom = None, crs = "geographic"))]
    #[allow(clippy::too_many_arguments)]
    fn render_map<'py>(
        &self,
        py: Python<'py>,
        code: &str,
        bbox: [f64; 4],
        width: u32,
        height: u32,
        layers: Option<Vec<String>>,
        scale_denom: Option<f64>,
        crs: &str,
    ) -> PyResult<(Bound<'py, PyBytes>, Py<PyAny>)> {
        let img = self
            .inner
            .render_map(&service::MapRequest {
                code: code.to_string(),
                bbox,
                bbox_crs: bbox_crs(crs)?,
                width,
                height,
                layers,
                scale_denom,
            })
            .map_err(service_err)?;
        let info = serde_json::json!({
            "width": img.width,
            "height": img.height,
            "scale_denom": img.scale_denom,
            "layers": img.layers,
            "bbox": img.bbox,
        });
        Ok((PyBytes::new(py, &img.png), to_py(py, &info)?))
    }

    /// GeoJSON FeatureCollection as a dict.
    #[pyo3(signature = (code, layer, bbox, scale_denom = None, crs = "geographic"))]
    fn features(&self, py: Python<'_>, code: &str, layer: &str, bbox: [f64; 4], scale_denom: Option<f64>, crs: &str) -> PyResult<Py<PyAny>> {
        let r = self
            .inner
            .get_features(&service::FeatureRequest {
                code: code.to_string(),
                layer: layer.to_string(),
                bbox,
                bbox_crs: bbox_crs(crs)?,
                scale_denom,
            })
            .map_err(service_err)?;
        from_json(py, &r.body)
    }

    #[pyo3(signature = (code, lon, lat, tolerance_px = 5.0, scale_denom = None, layers = None))]
    fn identify(
        &self,
        py: Python<'_>,
        code: &str,
        lon: f64,
        lat: f64,
        tolerance_px: f64,
        scale_denom: Option<f64>,
        layers: Option<Vec<String>>,
    ) -> PyResult<Py<PyAny>> {
        let r = self
            .inner
            .identify(&service::IdentifyRequest {
                code: code.to_string(),
                lon,
                lat,
                tolerance_px,
                scale_denom,
                layers,
            })
            .map_err(service_err)?;
        to_py(py, &r)
    }

    fn search(&self, py: Python<'_>, q: &str) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.search(q).map_err(service_err)?)
    }

    #[pyo3(signature = (code, scale_denom = None))]
    fn legend(&self, py: Python<'_>, code: &str, scale_denom: Option<f64>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.legend(code, scale_denom).map_err(service_err)?)
    }

    /// Re-reads every cache file; returns loaded and missing codes.
    fn reload(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.reload().map_err(service_err)?)
    }

    /// Writes a self-contained, relocatable bundle and returns its manifest.
    #[pyo3(signature = (out, codes = None, include_warehouses = false, force = false))]
    fn export_offline_bundle(
        &self,
        py: Python<'_>,
        out: PathBuf,
        codes: Option<Vec<String>>,
        include_warehouses: bool,
        force: bool,
    ) -> PyResult<Py<PyAny>> {
        let opts = BundleOptions {
            codes,
            include_warehouses,
            force,
        };
        to_py(py, &self.inner.export_offline_bundle(&out, &opts).map_err(service_err)?)
    }
}

/// Writes the synthetic source corpus and returns its manifest.
#[pyfunction]
#[pyo3(signature = (out, seed = fixtures::DEFAULT_SEED))]
fn make_fixtures(py: Python<'_>, out: PathBuf, seed: u64) -> PyResult<Py<PyAny>> {
    let m = fixtures::write_fixtures(&out, &AtlasCatalog::builtin(), seed).map_err(atlas_err)?;
    to_py(py, &m)
}

/// Writes the fixtures and builds every warehouse and cache under `out`,
/// leaving a directory ready to serve. Returns the cache build reports.
#[pyfunction]
#[pyo3(signature = (out, seed = fixtures::DEFAULT_SEED))]
fn build_data_dir(py: Python<'_>, out: PathBuf, seed: u64) -> PyResult<Py<PyAny>> {
    let reports = fixtures::build_data_dir(&out, &AtlasCatalog::builtin(), seed).map_err(atlas_err)?;
    to_py(py, &reports)
}

#[pymodule]
fn pacific_atlas(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("AtlasError", m.py().get_type::<AtlasError>())?;
    m.add_class::<Projection>()?;
    m.add_class::<Warehouse>()?;
    m.add_class::<Cache>()?;
    m.add_class::<PyAtlas>()?;
    m.add_function(wrap_pyfunction!(normalize_longitude, m)?)?;
    m.add_function(wrap_pyfunction!(to_wgs84, m)?)?;
    m.add_function(wrap_pyfunction!(fit_affine, m)?)?;
    m.add_function(wrap_pyfunction!(apply_affine, m)?)?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    m.add_function(wrap_pyfunction!(area, m)?)?;
    m.add_function(wrap_pyfunction!(make_fixtures, m)?)?;
    m.add_function(wrap_pyfunction!(build_data_dir, m)?)?;
    m.add("DEFAULT_SEED", fixtures::DEFAULT_SEED)?;
    Ok(())
}
