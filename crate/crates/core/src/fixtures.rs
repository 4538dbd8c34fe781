//! Deterministic synthetic source data.
//!
//! Every catalog entry gets a small archipelago: one island per site, rivers,
//! villages and rainfall zones, written as GeoJSON the way digitized map
//! sheets arrive. Some features are deliberately dirty (unclosed rings,
//! repeated vertices, clockwise outers, features split at sheet edges) so
//! the cleaning and merging steps have work to do. Fiji also gets a polygon
//! crossing the 180° meridian, and Tonga's villages arrive in a local grid
//! that needs a control-point fit.
//!
//! The same seed always yields the same bytes.

use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::catalog::{AtlasCatalog, CatalogEntry, REGION_CODE};
use crate::smartcache::{build_cache, BuildReport, CacheError, CacheSpec};
use crate::geo::{fit_affine, AffineTransform, ControlPointPair, GeoPoint, ProjectedPoint};
use crate::warehouse::{
    create_warehouse, AttrType, AttributeSpec, Color, GeometryKind, IngestOptions, LayerSpec, Style,
    ThemeGroup, Warehouse, WarehouseError, SHEET_MERGE_KEY,
};

pub const DEFAULT_SEED: u64 = 2003;

/// Id of Fiji's coastline polygon spanning 178°E to 177°W.
pub const DATELINE_FEATURE_ID: u64 = 9000;
pub const DATELINE_FEATURE_NAME: &str = "Dateline Bank";

/// Country whose village sheet is digitized in a local grid.
pub const LOCAL_GRID_CODE: &str = "TO";

/// Content timestamp pinned on fixture-built warehouses.
pub const FIXTURE_EPOCH: u64 = 1_062_374_400;

fn attr(name: &str, kind: AttrType, required: bool) -> AttributeSpec {
    AttributeSpec {
        name: name.to_string(),
        kind,
        required,
    }
}

fn color(s: &str) -> Color {
    s.parse().expect("literal color")
}

#[allow(clippy::too_many_arguments)]
fn layer(
    name: &str,
    kind: GeometryKind,
    group: ThemeGroup,
    attributes: Vec<AttributeSpec>,
    scales: (f64, f64),
    stroke: &str,
    fill: Option<&str>,
    symbol: Option<&str>,
) -> LayerSpec {
    LayerSpec {
        name: name.to_string(),
        geometry_kind: kind,
        theme_group: group,
        attributes,
        min_scale_denom: scales.0,
        max_scale_denom: scales.1,
        style: Style {
            stroke: color(stroke),
            stroke_width: if kind == GeometryKind::PolyLine { 1.5 } else { 1.0 },
            fill: fill.map(color),
            symbol: symbol.map(str::to_string),
        },
    }
}

/// Layers of every country warehouse.
pub fn country_layer_specs() -> Vec<LayerSpec> {
    use AttrType::*;
    vec![
        layer(
            "coastline",
            GeometryKind::MultiPolygon,
            ThemeGroup::GeneralReference,
            vec![attr("name", Text, true), attr(SHEET_MERGE_KEY, Text, false)],
            (1_000.0, 10_000_000.0),
            "#3b5b7a",
            Some("#efe6c8"),
            None,
        ),
        layer(
            "rivers",
            GeometryKind::PolyLine,
            ThemeGroup::Environment,
            vec![attr("name", Text, true), attr(SHEET_MERGE_KEY, Text, false)],
            (1_000.0, 100_000.0),
            "#2f7fd0",
            None,
            None,
        ),
        layer(
            "rainfall",
            GeometryKind::Polygon,
            ThemeGroup::Climate,
            vec![attr("zone", Text, true), attr("annual_mm", Real, true)],
            (100_000.0, 10_000_000.0),
            "#6a9a5b",
            Some("#cfe8c680"),
            None,
        ),
        layer(
            "villages",
            GeometryKind::Point,
            ThemeGroup::SocioEconomic,
            vec![
                attr("name", Text, true),
                attr("population", Integer, false),
                attr("capital", Boolean, false),
            ],
            (1_000.0, 500_000.0),
            "#7a2f2f",
            Some("#d04a3a"),
            Some("circle"),
        ),
        layer(
            "relief",
            GeometryKind::Image,
            ThemeGroup::GeneralReference,
            vec![],
            (1_000.0, 10_000_000.0),
            "#000000",
            None,
            None,
        ),
    ]
}

/// Layers of the regional warehouse.
pub fn region_layer_specs() -> Vec<LayerSpec> {
    use AttrType::*;
    vec![
        layer(
            "eez",
            GeometryKind::Polygon,
            ThemeGroup::GeneralReference,
            vec![attr("name", Text, true), attr("code", Text, true)],
            (250_000.0, 10_000_000.0),
            "#1f4e8c",
            Some("#1f4e8c22"),
            None,
        ),
        layer(
            "capitals",
            GeometryKind::Point,
            ThemeGroup::SocioEconomic,
            vec![attr("name", Text, true), attr("country", Text, true)],
            (1_000.0, 10_000_000.0),
            "#000000",
            Some("#ffffff"),
            Some("square"),
        ),
    ]
}

/// Single polygon layer used by the performance corpus.
pub fn corpus_layer_spec() -> LayerSpec {
    layer(
        "parcels",
        GeometryKind::Polygon,
        ThemeGroup::GeneralReference,
        vec![],
        (1_000.0, 10_000_000.0),
        "#444444",
        None,
        None,
    )
}

fn rng_for(seed: u64, code: &str) -> ChaCha8Rng {
    let h = code.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    });
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

/// Rounds to 1e-9 degrees so the written text stays short and stable.
fn r9(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

/// Longitude as a source sheet would write it, in `[-180, 180)`.
fn sheet_lon(lon: f64) -> f64 {
    r9(if lon >= 180.0 { lon - 360.0 } else { lon })
}

fn pos(lon: f64, lat: f64) -> Value {
    json!([sheet_lon(lon), r9(lat)])
}

fn ring_json(ring: &[(f64, f64)]) -> Value {
    Value::Array(ring.iter().map(|&(x, y)| pos(x, y)).collect())
}

fn feature(id: u64, geometry: Value, properties: Value) -> Value {
    json!({"type": "Feature", "id": id, "geometry": geometry, "properties": properties})
}

fn collection(features: Vec<Value>) -> String {
    let mut s = serde_json::to_string(&json!({"type": "FeatureCollection", "features": features}))
        .expect("fixture serializes");
    s.push('\n');
    s
}

const SYLLABLES: [&str; 12] = ["na", "ta", "vu", "la", "ko", "ma", "ri", "sa", "lo", "fa", "te", "mu"];

fn place_name(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(2..=3);
    let mut s: String = (0..n).map(|_| SYLLABLES[rng.gen_range(0..SYLLABLES.len())]).collect();
    s[..1].make_ascii_uppercase();
    s
}

/// Closed CCW ring around `(cx, cy)` with radii jittered per vertex.
fn island_ring(rng: &mut ChaCha8Rng, cx: f64, cy: f64, rx: f64, ry: f64, n: usize) -> Vec<(f64, f64)> {
    let mut ring: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            let s = rng.gen_range(0.75..1.0);
            (cx + rx * s * t.cos(), cy + ry * s * t.sin())
        })
        .collect();
    ring.push(ring[0]);
    ring
}

/// An island cut by a sheet edge at `x = cx`; returns (west, east) rings,
/// both CCW, sharing the seam vertices in opposite order.
fn split_island(rng: &mut ChaCha8Rng, cx: f64, cy: f64, rx: f64, ry: f64) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let arc = 10;
    let top = (cx, cy + ry);
    let bottom = (cx, cy - ry);
    let seam: Vec<(f64, f64)> = (1..4).map(|k| (cx, cy - ry + 2.0 * ry * k as f64 / 4.0)).collect();
    let mut jitter = |t: f64, sign: f64| {
        let s = rng.gen_range(0.8..1.0);
        (cx + sign * rx * s * t.sin().abs(), cy + ry * s * t.cos())
    };
    let mut west = vec![top];
    for k in 1..arc {
        west.push(jitter(std::f64::consts::PI * k as f64 / arc as f64, -1.0));
    }
    west.push(bottom);
    west.extend(seam.iter().copied());
    west.push(top);

    let mut east = vec![bottom];
    for k in 1..arc {
        east.push(jitter(std::f64::consts::PI * (arc - k) as f64 / arc as f64, 1.0));
    }
    east.push(top);
    east.extend(seam.iter().rev().copied());
    east.push(bottom);
    (west, east)
}

/// Densified rectangle, CCW, vertices at most `step` degrees apart.
fn rect_ring(b: [f64; 4], step: f64) -> Vec<(f64, f64)> {
    let mut ring = Vec::new();
    let mut edge = |a: (f64, f64), z: (f64, f64)| {
        let n = (((z.0 - a.0).abs().max((z.1 - a.1).abs())) / step).ceil().max(1.0) as usize;
        for k in 0..n {
            let t = k as f64 / n as f64;
            ring.push((a.0 + (z.0 - a.0) * t, a.1 + (z.1 - a.1) * t));
        }
    };
    edge((b[0], b[1]), (b[2], b[1]));
    edge((b[2], b[1]), (b[2], b[3]));
    edge((b[2], b[3]), (b[0], b[3]));
    edge((b[0], b[3]), (b[0], b[1]));
    ring.push((b[0], b[1]));
    ring
}

fn polygon(rings: &[Vec<(f64, f64)>]) -> Value {
    json!({"type": "Polygon", "coordinates": rings.iter().map(|r| ring_json(r)).collect::<Vec<_>>()})
}

fn linestring(line: &[(f64, f64)]) -> Value {
    json!({"type": "LineString", "coordinates": ring_json(line)})
}

/// Where a source file comes from and how to read it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceFile {
    pub layer: String,
    /// Relative to the fixture directory.
    pub path: String,
    /// Source CRS in the textual form accepted by `SourceCrs`.
    pub crs: String,
    /// Control points for files in a local grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gcp_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarehouseFixture {
    pub code: String,
    pub layers_file: String,
    pub sources: Vec<SourceFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub seed: u64,
    pub catalog: String,
    pub config: String,
    pub warehouses: Vec<WarehouseFixture>,
}

/// In-memory fixture for one warehouse: layer specs and source texts.
#[derive(Debug, Clone)]
pub struct FixtureSet {
    pub code: String,
    pub layers: Vec<LayerSpec>,
    /// `(source description, GeoJSON text)`.
    pub sources: Vec<(SourceFile, String)>,
    /// Control points for the local-grid source, if any.
    pub control_points: Option<Vec<ControlPointPair>>,
}

impl FixtureSet {
    /// Builds the warehouse in memory with the standard pipeline: ingest,
    /// clean, merge. The content timestamp is pinned.
    pub fn build(&self) -> Result<Warehouse, WarehouseError> {
        let mut w = create_warehouse(&self.code, self.layers.clone())?;
        for (src, text) in &self.sources {
            let mut opts = IngestOptions {
                crs: src.crs.parse()?,
                ..IngestOptions::default()
            };
            if let Some(cp) = &self.control_points {
                if src.gcp_file.is_some() {
                    opts.affine = Some(fit_affine(cp)?.transform);
                }
            }
            w.ingest(&src.layer, text, &opts)?;
        }
        for l in w.layer_specs() {
            if l.geometry_kind != GeometryKind::Image {
                w.clean_topology(&l.name, crate::tolerances::DEFAULT_SNAP_TOL_DEG)?;
                w.merge_sheets(&l.name, crate::tolerances::DEFAULT_SEAM_TOL_DEG)?;
            }
        }
        w.set_updated_unix(FIXTURE_EPOCH);
        Ok(w)
    }
}

fn source(code: &str, layer: &str, crs: &str) -> SourceFile {
    SourceFile {
        layer: layer.to_string(),
        path: format!("sources/{code}/{layer}.geojson"),
        crs: crs.to_string(),
        gcp_file: None,
    }
}

/// Synthetic archipelago for one country.
pub fn country_fixture(e: &CatalogEntry, seed: u64) -> FixtureSet {
    let mut rng = rng_for(seed, &e.code);
    let code = e.code.as_str();
    let mut coast = Vec::new();
    let mut rivers = Vec::new();
    let mut villages: Vec<(String, f64, f64, i64, bool)> = Vec::new();
    let (mut coast_id, mut river_id) = (1u64, 1u64);

    for (si, site) in e.sites.iter().enumerate() {
        let b = site.bbox;
        let (cx, cy) = ((b[0] + b[2]) / 2.0, (b[1] + b[3]) / 2.0);
        let rx = ((b[2] - b[0]) * 0.3).min(0.4);
        let ry = ((b[3] - b[1]) * 0.3).min(0.4);
        if si == 0 {
            let key = format!("{code}-island-1");
            let (west, east) = split_island(&mut rng, cx, cy, rx, ry);
            for ring in [west, east] {
                coast.push(feature(
                    coast_id,
                    polygon(&[ring]),
                    json!({"name": site.name, SHEET_MERGE_KEY: key, "source_sheet": format!("{code}-{coast_id}")}),
                ));
                coast_id += 1;
            }
            // A river cut by the same sheet edge.
            let key = format!("{code}-river-1");
            let mid = (cx, cy + ry * 0.1);
            let w1 = vec![(cx - rx * 0.6, cy + ry * 0.3), (cx - rx * 0.3, cy + ry * 0.2), mid];
            let w2 = vec![mid, (cx + rx * 0.3, cy), (cx + rx * 0.6, cy - ry * 0.2)];
            for line in [w1, w2] {
                rivers.push(feature(river_id, linestring(&line), json!({"name": format!("{} River", site.name), SHEET_MERGE_KEY: key})));
                river_id += 1;
            }
        } else {
            let mut ring = island_ring(&mut rng, cx, cy, rx, ry, 24);
            match si % 4 {
                // Last vertex misses the first by less than the snap tolerance.
                1 => {
                    let last = ring.len() - 1;
                    ring[last].0 += 4e-7;
                }
                // Repeated vertex.
                2 => ring.insert(5, ring[5]),
                // Clockwise outer ring.
                3 => ring.reverse(),
                _ => {}
            }
            coast.push(feature(coast_id, polygon(&[ring]), json!({"name": site.name})));
            coast_id += 1;
            let mut line = vec![(cx, cy)];
            for k in 1..5 {
                let t = k as f64 / 5.0;
                line.push((cx + rx * 0.6 * t, cy + ry * rng.gen_range(-0.2..0.2) * t));
            }
            rivers.push(feature(river_id, linestring(&line), json!({"name": format!("{} River", site.name)})));
            river_id += 1;
        }
        for k in 0..2 {
            let (x, y) = (cx + rx * rng.gen_range(-0.5..0.5), cy + ry * rng.gen_range(-0.5..0.5));
            let capital = si == 0 && k == 0 && e.capital.is_some();
            let name = match (&e.capital, capital) {
                (Some(c), true) => c.clone(),
                _ => place_name(&mut rng),
            };
            let pop = if capital { rng.gen_range(5_000..60_000) } else { rng.gen_range(50..4_000) };
            villages.push((name, x, y, pop, capital));
        }
    }

    if code == "FJ" {
        // South edge eastward then north edge westward: CCW, 0.25° spacing.
        let mut ring: Vec<(f64, f64)> = (0..=20).map(|k| (178.0 + 0.25 * k as f64, -15.6)).collect();
        ring.extend((0..=20).map(|k| (183.0 - 0.25 * k as f64, -15.2)));
        ring.push(ring[0]);
        coast.push(feature(DATELINE_FEATURE_ID, polygon(&[ring]), json!({"name": DATELINE_FEATURE_NAME})));
    }

    let x = e.extent;
    let mid = ((x[0] + x[2]) / 2.0 * 10.0).round() / 10.0;
    let rainfall = vec![
        feature(1, polygon(&[rect_ring([x[0], x[1], mid, x[3]], 0.5)]), json!({"zone": "windward", "annual_mm": rng.gen_range(2500..4000)})),
        feature(2, polygon(&[rect_ring([mid, x[1], x[2], x[3]], 0.5)]), json!({"zone": "leeward", "annual_mm": rng.gen_range(1200..2500) as f64 + 0.5})),
    ];

    let mut sources = vec![
        (source(code, "coastline", "geographic"), collection(coast)),
        (source(code, "rivers", "geographic"), collection(rivers)),
        (source(code, "rainfall", "geographic"), collection(rainfall)),
    ];
    let mut control_points = None;
    let village_features = |coords: &dyn Fn(f64, f64) -> Value| -> Vec<Value> {
        villages
            .iter()
            .enumerate()
            .map(|(i, (name, lon, lat, pop, cap))| {
                feature(
                    i as u64 + 1,
                    json!({"type": "Point", "coordinates": coords(*lon, *lat)}),
                    json!({"name": name, "population": pop, "capital": cap}),
                )
            })
            .collect()
    };
    if code == LOCAL_GRID_CODE {
        let (grid, cps, text) = local_grid_villages(e, &village_features);
        let mut src = source(code, "villages", &grid);
        src.gcp_file = Some(format!("gcp/{code}-villages.json"));
        sources.push((src, text));
        control_points = Some(cps);
    } else {
        sources.push((source(code, "villages", "geographic"), collection(village_features(&pos))));
    }

    FixtureSet {
        code: code.to_string(),
        layers: country_layer_specs(),
        sources,
        control_points,
    }
}

/// Local sheet grid: a small rotation, scale and offset from the country's
/// cache projection.
fn local_grid() -> AffineTransform {
    let (theta, s) = (0.35f64.to_radians(), 1.000_15);
    let (c, n) = (theta.cos() * s, theta.sin() * s);
    AffineTransform::new(c, -n, 512_345.25, n, c, 8_765_432.5).expect("invertible")
}

type VillageWriter<'a> = dyn Fn(&dyn Fn(f64, f64) -> Value) -> Vec<Value> + 'a;

fn local_grid_villages(e: &CatalogEntry, write: &VillageWriter<'_>) -> (String, Vec<ControlPointPair>, String) {
    let proj = e.projection.projector();
    let to_local = local_grid().inverse().expect("invertible");
    let local = |lon: f64, lat: f64| -> ProjectedPoint {
        let p = proj.forward(&GeoPoint::new(lon, lat).expect("fixture point")).expect("inside zone");
        to_local.apply(&p).expect("finite")
    };
    let coords = |lon: f64, lat: f64| {
        let q = local(lon, lat);
        json!([(q.x() * 1e4).round() / 1e4, (q.y() * 1e4).round() / 1e4])
    };
    let x = e.extent;
    let corners = [
        (x[0], x[1]),
        (x[2], x[1]),
        (x[2], x[3]),
        (x[0], x[3]),
        ((x[0] + x[2]) / 2.0, (x[1] + x[3]) / 2.0),
        (x[0] * 0.3 + x[2] * 0.7, x[1] * 0.6 + x[3] * 0.4),
    ];
    let cps = corners
        .iter()
        .map(|&(lon, lat)| {
            let target = proj.forward(&GeoPoint::new(lon, lat).expect("corner")).expect("inside zone");
            let source = to_local.apply(&target).expect("finite");
            ControlPointPair { source, target }
        })
        .collect();
    (e.projection.to_string(), cps, collection(write(&coords)))
}

/// Regional warehouse: EEZ boxes and capitals.
pub fn region_fixture(c: &AtlasCatalog) -> FixtureSet {
    let mut eez = Vec::new();
    let mut capitals = Vec::new();
    for (i, e) in c.countries.iter().enumerate() {
        let x = e.extent;
        let b = [x[0] - 1.5, (x[1] - 1.5).max(-89.0), x[2] + 1.5, (x[3] + 1.5).min(89.0)];
        eez.push(feature(i as u64 + 1, polygon(&[rect_ring(b, 1.0)]), json!({"name": e.name, "code": e.code})));
        let site = &e.sites[0].bbox;
        let name = e.capital.clone().unwrap_or_else(|| e.name.clone());
        capitals.push(feature(
            i as u64 + 1,
            json!({"type": "Point", "coordinates": pos((site[0] + site[2]) / 2.0, (site[1] + site[3]) / 2.0)}),
            json!({"name": name, "country": e.name}),
        ));
    }
    FixtureSet {
        code: REGION_CODE.to_string(),
        layers: region_layer_specs(),
        sources: vec![
            (source(REGION_CODE, "eez", "geographic"), collection(eez)),
            (source(REGION_CODE, "capitals", "geographic"), collection(capitals)),
        ],
        control_points: None,
    }
}

/// `n` small squares (10 m to 300 m) uniformly spread over `extent`.
pub fn corpus_geojson(n: usize, seed: u64, extent: [f64; 4]) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = (0..n)
        .map(|i| {
            let x = rng.gen_range(extent[0]..extent[2]);
            let y = rng.gen_range(extent[1]..extent[3]);
            let s = rng.gen_range(1e-4..3e-3);
            let ring = vec![(x, y), (x + s, y), (x + s, y + s), (x, y + s), (x, y)];
            feature(i as u64 + 1, polygon(&[ring]), Value::Object(Map::new()))
        })
        .collect();
    collection(features)
}

/// Warehouse holding the `parcels` corpus, ingested and pinned.
pub fn corpus_warehouse(code: &str, n: usize, seed: u64, extent: [f64; 4]) -> Result<Warehouse, WarehouseError> {
    let mut w = create_warehouse(code, vec![corpus_layer_spec()])?;
    w.ingest("parcels", &corpus_geojson(n, seed, extent), &IngestOptions::default())?;
    w.set_updated_unix(FIXTURE_EPOCH);
    Ok(w)
}

/// Fixture sets for all thirteen warehouses, countries first.
pub fn all_fixtures(c: &AtlasCatalog, seed: u64) -> Vec<FixtureSet> {
    let mut v: Vec<FixtureSet> = c.countries.iter().map(|e| country_fixture(e, seed)).collect();
    v.push(region_fixture(c));
    v
}

/// Writes sources, layer specs, control points, the catalog, a server
/// config and `manifest.json` under `dir`.
pub fn write_fixtures(dir: &Path, c: &AtlasCatalog, seed: u64) -> io::Result<FixtureManifest> {
    let mut warehouses = Vec::new();
    for set in all_fixtures(c, seed) {
        let layers_file = format!("layers/{}.json", set.code);
        write_text(dir, &layers_file, &serde_json::to_string_pretty(&set.layers).expect("specs serialize"))?;
        for (src, text) in &set.sources {
            write_text(dir, &src.path, text)?;
            if let (Some(g), Some(cps)) = (&src.gcp_file, &set.control_points) {
                write_text(dir, g, &serde_json::to_string_pretty(cps).expect("gcps serialize"))?;
            }
        }
        warehouses.push(WarehouseFixture {
            code: set.code.clone(),
            layers_file,
            sources: set.sources.iter().map(|(s, _)| s.clone()).collect(),
        });
    }
    write_text(dir, "catalog.json", &c.to_json_pretty())?;
    write_text(dir, "atlas.toml", "catalog = \"catalog.json\"\ndata_dir = \".\"\n")?;
    let manifest = FixtureManifest {
        seed,
        catalog: "catalog.json".into(),
        config: "atlas.toml".into(),
        warehouses,
    };
    write_text(dir, "manifest.json", &serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
    Ok(manifest)
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{0}: {1}")]
    Warehouse(String, WarehouseError),
    #[error("{0}: {1}")]
    Cache(String, CacheError),
}

/// Writes the fixtures, then builds every warehouse and its cache at the
/// catalog paths under `dir`. The result is a data directory ready to serve.
pub fn build_data_dir(dir: &Path, c: &AtlasCatalog, seed: u64) -> Result<Vec<BuildReport>, FixtureError> {
    write_fixtures(dir, c, seed)?;
    let mut reports = Vec::new();
    for set in all_fixtures(c, seed) {
        let entry = c.entry(&set.code).expect("fixture codes come from the catalog");
        let w = set.build().map_err(|e| FixtureError::Warehouse(set.code.clone(), e))?;
        let wpath = dir.join(&entry.warehouse_path);
        if let Some(p) = wpath.parent() {
            fs::create_dir_all(p)?;
        }
        w.save(&wpath).map_err(|e| FixtureError::Warehouse(set.code.clone(), e))?;
        let spec = CacheSpec::all_vector_layers(&w, entry.projection, entry.base_scale_denom);
        let cpath = dir.join(&entry.cache_path);
        if let Some(p) = cpath.parent() {
            fs::create_dir_all(p)?;
        }
        reports.push(build_cache(&w, &spec, &cpath).map_err(|e| FixtureError::Cache(set.code.clone(), e))?);
    }
    Ok(reports)
}

fn write_text(dir: &Path, rel: &str, text: &str) -> io::Result<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    fs::write(path, text)
}
