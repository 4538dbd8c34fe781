//! The atlas catalog: twelve member countries plus the region.
//!
//! Statistics (capital, 2003 population estimate, land area, coastline),
//! base scales and site lists are fixed published values. Extents, site
//! boxes and cache projections are operator data; the built-in values are
//! approximate and serve the synthetic corpus.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{Ellipsoid, ProjectionKind, ProjectionSpec};

/// Code of the regional warehouse.
pub const REGION_CODE: &str = "REGION";

/// Base scale denominators allowed for countries.
pub const COUNTRY_BASE_SCALES: [u32; 3] = [50_000, 100_000, 250_000];
pub const REGION_BASE_SCALE: u32 = 1_000_000;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse catalog: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid catalog: {0}")]
    Invalid(String),
}

/// A navigable site. `bbox` is `[min_lon, min_lat, max_lon, max_lat]` in
/// degrees with longitudes in `[0, 360)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub name: String,
    pub bbox: [f64; 4],
    /// True for the single entry that covers a whole country.
    #[serde(default)]
    pub whole_country: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub code: String,
    pub name: String,
    pub capital: Option<String>,
    pub population: u64,
    pub area_km2: u64,
    pub coastline_km: u64,
    pub base_scale_denom: u32,
    pub extent: [f64; 4],
    pub sites: Vec<Site>,
    /// Relative to the data directory.
    pub warehouse_path: String,
    pub cache_path: String,
    /// Planar CRS of the published cache.
    pub projection: ProjectionSpec,
}

impl CatalogEntry {
    pub fn site(&self, name: &str) -> Option<&Site> {
        self.sites.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtlasCatalog {
    pub countries: Vec<CatalogEntry>,
    pub region: CatalogEntry,
}

impl AtlasCatalog {
    pub fn builtin() -> AtlasCatalog {
        builtin_catalog()
    }

    pub fn load(path: &Path) -> Result<AtlasCatalog, CatalogError> {
        let c: AtlasCatalog = serde_json::from_slice(&std::fs::read(path)?)?;
        c.check()?;
        Ok(c)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }

    /// Countries followed by the region.
    pub fn entries(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.countries.iter().chain(std::iter::once(&self.region))
    }

    pub fn entry(&self, code: &str) -> Option<&CatalogEntry> {
        self.entries().find(|e| e.code == code)
    }

    /// Structural invariants: 12 countries with distinct codes, allowed base
    /// scales, region at 1:1,000,000 and non-empty site lists.
    pub fn check(&self) -> Result<(), CatalogError> {
        let bad = |m: String| Err(CatalogError::Invalid(m));
        if self.countries.len() != 12 {
            return bad(format!("expected 12 countries, found {}", self.countries.len()));
        }
        if self.region.code != REGION_CODE || self.region.base_scale_denom != REGION_BASE_SCALE {
            return bad("region entry must be REGION at 1:1000000".into());
        }
        let mut codes = BTreeSet::new();
        for e in self.entries() {
            if !codes.insert(e.code.as_str()) {
                return bad(format!("duplicate code {}", e.code));
            }
            if e.code != REGION_CODE && !COUNTRY_BASE_SCALES.contains(&e.base_scale_denom) {
                return bad(format!("{}: base scale {} not allowed", e.code, e.base_scale_denom));
            }
            if e.sites.is_empty() {
                return bad(format!("{}: no sites", e.code));
            }
            for b in std::iter::once(&e.extent).chain(e.sites.iter().map(|s| &s.bbox)) {
                if !(b[0] <= b[2] && b[1] <= b[3] && b[0] >= 0.0 && b[2] <= 360.0) {
                    return bad(format!("{}: malformed box {b:?}", e.code));
                }
            }
        }
        Ok(())
    }
}

/// Whether `code` names a built-in catalog entry.
pub fn is_known_code(code: &str) -> bool {
    code == REGION_CODE || COUNTRIES.iter().any(|c| c.0 == code)
}

type Row = (
    &'static str,
    &'static str,
    Option<&'static str>,
    u64,
    u64,
    u64,
    u32,
    [f64; 4],
    &'static [(&'static str, [f64; 4])],
);

// code, name, capital, population, area km², coastline km, base scale,
// extent, sites (an empty list means one whole-country entry).
const COUNTRIES: [Row; 12] = [
    ("CK", "Cook Islands", Some("Rarotonga"), 21008, 240, 120, 100_000, [194.0, -22.0, 202.5, -8.9], &[
        ("Northern Group", [194.0, -13.3, 202.0, -8.9]),
        ("Southern Group", [199.7, -22.0, 202.5, -18.0]),
        ("Rarotonga", [200.15, -21.30, 200.30, -21.18]),
    ]),
    ("FJ", "Fiji Islands", Some("Suva"), 868531, 18270, 1129, 250_000, [176.8, -21.1, 181.9, -12.4], &[
        ("Viti Levu", [177.2, -18.35, 178.75, -17.25]),
        ("Vanua Levu / Taveuni", [178.4, -17.1, 180.2, -16.1]),
        ("Yassawa / Mamanucas", [176.85, -17.9, 177.6, -16.7]),
        ("Lomaiviti Group", [178.5, -18.1, 179.4, -17.2]),
        ("Lau group", [180.0, -21.1, 181.9, -16.7]),
        ("Kadavu group", [177.8, -19.2, 178.6, -18.6]),
        ("Rotuma", [176.95, -12.6, 177.2, -12.4]),
    ]),
    ("KI", "Kiribati", Some("Bairiki"), 98549, 811, 1143, 50_000, [168.9, -11.5, 210.3, 4.8], &[
        ("Gilbert Islands", [168.9, -2.7, 177.0, 3.3]),
        ("Line Islands", [197.5, -11.5, 210.3, 4.8]),
        ("Phoenix Islands", [185.4, -4.8, 189.3, -2.7]),
    ]),
    ("MH", "Marshall Islands", Some("Majuro"), 56429, 182, 370, 50_000, [160.7, 4.5, 172.2, 14.8], &[]),
    ("NR", "Nauru", Some("Yaren"), 12570, 21, 30, 50_000, [166.89, -0.56, 166.97, -0.49], &[]),
    ("NU", "Niue", Some("Alofi"), 2145, 260, 64, 50_000, [190.05, -19.17, 190.25, -18.94], &[]),
    ("TK", "Tokelau", None, 1418, 10, 101, 50_000, [187.4, -9.5, 188.9, -8.5], &[]),
    ("TO", "Tonga", Some("Nuku'alofa"), 108141, 748, 419, 100_000, [184.0, -22.4, 186.5, -15.5], &[
        ("Vavau group", [185.8, -18.9, 186.2, -18.5]),
        ("Haapai group", [185.4, -20.3, 185.9, -19.5]),
        ("Tongatapu / Ata", [184.6, -22.4, 185.3, -21.0]),
    ]),
    ("TV", "Tuvalu", Some("Funafuti"), 11305, 26, 24, 100_000, [176.0, -10.9, 179.9, -5.6], &[]),
    ("SB", "Solomon Islands", Some("Honiara"), 509190, 28450, 5313, 250_000, [155.4, -12.4, 170.4, -5.0], &[
        ("Temotu", [165.5, -12.4, 170.4, -9.6]),
        ("Makira-Ulawa", [161.3, -11.0, 162.5, -9.7]),
        ("Malaita", [160.5, -9.9, 161.6, -8.2]),
        ("Guadalcanal / Central", [159.5, -10.0, 160.9, -8.9]),
        ("Isabel", [158.3, -8.9, 159.9, -7.3]),
        ("Western / Choiseul", [155.4, -9.0, 158.3, -6.5]),
    ]),
    ("VU", "Vanuatu", Some("Port Vila"), 199414, 12200, 2528, 250_000, [166.4, -20.3, 170.3, -13.0], &[
        ("Efate", [168.1, -17.85, 168.65, -17.45]),
        ("Tafea", [168.9, -20.3, 170.3, -18.6]),
        ("Shepherds", [168.3, -17.2, 168.7, -16.8]),
        ("Epi", [168.0, -16.9, 168.4, -16.55]),
        ("Paama", [168.2, -16.55, 168.3, -16.4]),
        ("Ambrym", [167.9, -16.4, 168.3, -16.1]),
        ("Pentecost", [168.1, -16.1, 168.35, -15.4]),
        ("Malakula", [167.1, -16.6, 167.9, -15.8]),
        ("Ambae-Maewo", [167.6, -15.5, 168.3, -14.9]),
        ("Santo-Malo", [166.5, -15.7, 167.3, -14.6]),
        ("Banks-Torres", [166.5, -14.6, 168.2, -13.0]),
    ]),
    ("WS", "Western Samoa", Some("Apia"), 178173, 2944, 403, 250_000, [187.1, -14.1, 188.4, -13.4], &[
        ("Upolu", [188.0, -14.1, 188.4, -13.8]),
        ("Savaii", [187.2, -13.85, 187.85, -13.4]),
    ]),
];

const REGION_EXTENT: [f64; 4] = [155.0, -23.0, 211.0, 15.0];

/// TM centred on the extent for countries that fit one zone, otherwise the
/// equirectangular fallback.
fn projection_for(extent: &[f64; 4]) -> ProjectionSpec {
    let cm = ((extent[0] + extent[2]) / 2.0 * 2.0).round() / 2.0;
    let half_width = (extent[2] - extent[0]) / 2.0 + (cm - (extent[0] + extent[2]) / 2.0).abs();
    let northern = extent[1] >= 0.0;
    let false_northing = if northern { 0.0 } else { 10_000_000.0 };
    let kind = if half_width < 9.0 {
        ProjectionKind::TransverseMercator
    } else {
        ProjectionKind::Equirectangular
    };
    ProjectionSpec::new(kind, cm, 0.0, 0.9996, 500_000.0, false_northing, Ellipsoid::WGS84)
        .expect("built-in projection parameters are valid")
}

fn entry(row: &Row) -> CatalogEntry {
    let (code, name, capital, population, area, coast, scale, extent, sites) = *row;
    let sites = if sites.is_empty() {
        vec![Site {
            name: name.to_string(),
            bbox: extent,
            whole_country: true,
        }]
    } else {
        sites
            .iter()
            .map(|(n, b)| Site {
                name: n.to_string(),
                bbox: *b,
                whole_country: false,
            })
            .collect()
    };
    CatalogEntry {
        code: code.to_string(),
        name: name.to_string(),
        capital: capital.map(str::to_string),
        population,
        area_km2: area,
        coastline_km: coast,
        base_scale_denom: scale,
        extent,
        sites,
        warehouse_path: format!("warehouses/{code}.piwa"),
        cache_path: format!("caches/{code}.pisc"),
        projection: projection_for(&extent),
    }
}

fn builtin_catalog() -> AtlasCatalog {
    let region = CatalogEntry {
        code: REGION_CODE.to_string(),
        name: "Pacific Region".to_string(),
        capital: None,
        population: COUNTRIES.iter().map(|c| c.3).sum(),
        area_km2: COUNTRIES.iter().map(|c| c.4).sum(),
        coastline_km: COUNTRIES.iter().map(|c| c.5).sum(),
        base_scale_denom: REGION_BASE_SCALE,
        extent: REGION_EXTENT,
        sites: vec![Site {
            name: "Pacific Region".to_string(),
            bbox: REGION_EXTENT,
            whole_country: true,
        }],
        warehouse_path: format!("warehouses/{REGION_CODE}.piwa"),
        cache_path: format!("caches/{REGION_CODE}.pisc"),
        projection: ProjectionSpec::new(
            ProjectionKind::Equirectangular,
            183.0,
            0.0,
            1.0,
            0.0,
            0.0,
            Ellipsoid::WGS84,
        )
        .expect("valid"),
    };
    AtlasCatalog {
        countries: COUNTRIES.iter().map(entry).collect(),
        region,
    }
}
