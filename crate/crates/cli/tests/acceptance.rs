//! The primary acceptance criteria, one check each. Every criterion prints a
//! single PASS or FAIL line and the test fails if any of them does.
//!
//! The end-to-end checks drive the `atlas` binary with `SOURCE_DATE_EPOCH`
//! pinned; the rest call the libraries directly against independent oracles.

#[path = "../../core/tests/common/oracles.rs"]
mod oracles;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader};
use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdout, Command, Stdio};
use std::time::Instant;

use atlas_core::catalog::AtlasCatalog;
use atlas_core::fixtures::{build_data_dir, corpus_warehouse, FixtureManifest, DATELINE_FEATURE_ID, DEFAULT_SEED, FIXTURE_EPOCH};
use atlas_core::geo::*;
use atlas_core::smartcache::*;
use atlas_core::warehouse::{Geometry, IngestOptions};
use oracles::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn run_check(name: &str, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let result = std::panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into());
        Err(format!("panic: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    match &result {
        Ok(detail) => println!("PASS {name} ({detail}; {secs:.2} s)"),
        Err(why) => println!("FAIL {name}: {why} ({secs:.2} s)"),
    }
    result.is_ok()
}

// ---------------------------------------------------------------------------
// Binary and HTTP plumbing.

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs the binary with a pinned clock and returns the command's JSON
/// report.
fn atlas_bin(args: &[&str]) -> Result<Value, String> {
    let report = tempfile::NamedTempFile::new().map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_atlas"))
        .arg("--report")
        .arg(report.path())
        .args(args)
        .env("SOURCE_DATE_EPOCH", FIXTURE_EPOCH.to_string())
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "atlas {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    let v: Value = serde_json::from_slice(&std::fs::read(report.path()).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    Ok(v["report"].clone())
}

struct ServerProc {
    child: Child,
    url: String,
    _stdout: BufReader<ChildStdout>,
}

impl ServerProc {
    fn spawn(config: &Path) -> Result<ServerProc, String> {
        let mut child = Command::new(env!("CARGO_BIN_EXE_atlas"))
            .args(["serve", "--config", s(config), "--listen", "127.0.0.1:0"])
            .env("RUST_LOG", "warn")
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| e.to_string())?;
        let mut stdout = BufReader::new(child.stdout.take().unwrap());
        let mut line = String::new();
        stdout.read_line(&mut line).map_err(|e| e.to_string())?;
        let Some(url) = line.trim().strip_prefix("listening on ") else {
            let _ = child.kill();
            return Err(format!("unexpected first line {line:?}"));
        };
        Ok(ServerProc {
            url: url.to_string(),
            child,
            _stdout: stdout,
        })
    }
}

impl Drop for ServerProc {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[derive(PartialEq)]
struct Reply {
    status: u16,
    headers: BTreeMap<String, String>,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Result<Value, String> {
        serde_json::from_slice(&self.body).map_err(|e| format!("bad JSON: {e}"))
    }
    fn header(&self, name: &str) -> &str {
        self.headers.get(name).map(String::as_str).unwrap_or("")
    }
}

fn http_get(agent: &ureq::Agent, base: &str, path: &str) -> Result<Reply, String> {
    let mut resp = agent.get(format!("{base}{path}")).call().map_err(|e| format!("GET {path}: {e}"))?;
    let headers = resp
        .headers()
        .iter()
        .filter(|(k, _)| k.as_str() == "content-type" || k.as_str().starts_with("x-"))
        .map(|(k, v)| (k.as_str().to_string(), v.to_str().unwrap_or("").to_string()))
        .collect();
    Ok(Reply {
        status: resp.status().as_u16(),
        headers,
        body: resp.body_mut().with_config().limit(64 << 20).read_to_vec().map_err(|e| e.to_string())?,
    })
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

fn png_size(png: &[u8]) -> Option<(u32, u32)> {
    if png.len() < 24 || &png[..8] != b"\x89PNG\r\n\x1a\n" || &png[12..16] != b"IHDR" {
        return None;
    }
    let be = |b: &[u8]| u32::from_be_bytes([b[0], b[1], b[2], b[3]]);
    Some((be(&png[16..20]), be(&png[20..24])))
}

fn bbox_q(b: [f64; 4]) -> String {
    format!("{},{},{},{}", b[0], b[1], b[2], b[3])
}

// ---------------------------------------------------------------------------
// Shared state: a data directory produced by the CLI pipeline and a server
// process answering from it.

struct Live {
    dir: tempfile::TempDir,
    server: ServerProc,
    agent: ureq::Agent,
    manifest: FixtureManifest,
    first_clean_changes: u64,
    first_merges: u64,
}

impl Live {
    fn get(&self, path: &str) -> Result<Reply, String> {
        http_get(&self.agent, &self.server.url, path)
    }
}

fn cli_pipeline(dir: &Path, wf: &atlas_core::fixtures::WarehouseFixture) -> Result<(u64, u64), String> {
    let d = s(dir);
    let code = wf.code.as_str();
    let layers = dir.join(&wf.layers_file);
    atlas_bin(&["--data-dir", d, "create-warehouse", "--warehouse", code, "--layers", s(&layers), "--force"])?;
    for src in &wf.sources {
        let file = dir.join(&src.path);
        let gcp = src.gcp_file.as_ref().map(|g| dir.join(g));
        let mut args = vec!["--data-dir", d, "ingest", "--warehouse", code, "--layer", &src.layer, "--crs", &src.crs];
        if let Some(g) = &gcp {
            args.extend(["--gcp", s(g)]);
        }
        args.push(s(&file));
        atlas_bin(&args)?;
    }
    let clean = atlas_bin(&["--data-dir", d, "clean", "--warehouse", code])?;
    let merge = atlas_bin(&["--data-dir", d, "merge", "--warehouse", code])?;
    atlas_bin(&["--data-dir", d, "validate", "--warehouse", code])?;
    atlas_bin(&["--data-dir", d, "build-cache", "--warehouse", code])?;
    let count = |v: &Value, key: &str| v[key].as_u64().ok_or(format!("{code}: no '{key}' in report"));
    Ok((count(&clean, "changes")?, count(&merge, "merged")?))
}

/// Fixtures, the operator pipeline for all thirteen warehouses and a
/// running server, followed by the per-operation checks.
fn end_to_end(live: &mut Option<Live>) -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    atlas_bin(&["make-fixtures", "--out", s(dir.path())])?;
    let manifest: FixtureManifest =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).map_err(|e| e.to_string())?;
    ensure!(manifest.warehouses.len() == 13, "{} fixture warehouses", manifest.warehouses.len());
    let (mut changes, mut merges) = (0, 0);
    for wf in &manifest.warehouses {
        let (c, m) = cli_pipeline(dir.path(), wf)?;
        changes += c;
        merges += m;
    }

    // The library route to the same caches must agree byte for byte.
    let lib = tempfile::tempdir().unwrap();
    let catalog = AtlasCatalog::builtin();
    build_data_dir(lib.path(), &catalog, DEFAULT_SEED).map_err(|e| e.to_string())?;
    for e in catalog.entries() {
        let a = std::fs::read(dir.path().join(&e.cache_path)).map_err(|e| e.to_string())?;
        let b = std::fs::read(lib.path().join(&e.cache_path)).unwrap();
        ensure!(a == b, "{}: CLI cache differs from library build", e.code);
    }

    let server = ServerProc::spawn(&dir.path().join("atlas.toml"))?;
    let l = Live {
        dir,
        server,
        agent: agent(),
        manifest,
        first_clean_changes: changes,
        first_merges: merges,
    };
    let fj = catalog.entry("FJ").unwrap();

    // map
    let q = format!("/api/map?warehouse=FJ&bbox={}&width=512&height=384&scale_denom=250000", bbox_q(fj.extent));
    let r = l.get(&q)?;
    ensure!(r.status == 200 && r.header("content-type") == "image/png", "map status {}", r.status);
    ensure!(png_size(&r.body) == Some((512, 384)), "map size {:?}", png_size(&r.body));
    let drawn: Vec<&str> = r.header("x-layers").split(',').collect();
    ensure!(drawn == ["coastline", "rainfall", "villages"], "layers at 1:250000 {drawn:?}");
    ensure!(l.get(&q)?.body == r.body, "map output not deterministic");
    let ocean = l.get("/api/map?warehouse=FJ&bbox=172,-25,173,-24&width=64&height=64&scale_denom=250000")?;
    ensure!(png_size(&ocean.body) == Some((64, 64)), "ocean map size");

    // identify at the capital village
    let site = fj.site("Viti Levu").unwrap().bbox;
    let v = l.get(&format!("/api/features?warehouse=FJ&layer=villages&bbox={}&scale_denom=250000", bbox_q(site)))?.json()?;
    let suva = v["features"]
        .as_array()
        .and_then(|fs| fs.iter().find(|f| f["properties"]["name"] == "Suva"))
        .ok_or("no Suva village in features")?;
    let (lon, lat) = (suva["geometry"]["coordinates"][0].as_f64().unwrap(), suva["geometry"]["coordinates"][1].as_f64().unwrap());
    let id = l.get(&format!("/api/identify?warehouse=FJ&lon={lon}&lat={lat}&tolerance_px=5&scale_denom=250000"))?.json()?;
    ensure!((id["tolerance_m"].as_f64().unwrap() - 5.0 * 0.00028 * 250_000.0).abs() < 1e-9, "tolerance {}", id["tolerance_m"]);
    let hit = id["hits"]
        .as_array()
        .and_then(|h| h.iter().find(|h| h["layer"] == "villages" && h["attributes"]["name"] == "Suva"))
        .ok_or("identify missed Suva")?;
    ensure!(hit["distance_m"].as_f64().unwrap() < 1.0, "Suva at {} m", hit["distance_m"]);

    // search
    let hits = l.get("/api/search?q=viti")?.json()?;
    let first = &hits[0];
    ensure!(first["code"] == "FJ" && first["name"] == "Viti Levu" && first["kind"] == "site", "search viti gave {first}");
    let b: Vec<f64> = serde_json::from_value(first["bbox"].clone()).unwrap();
    ensure!(b == site, "Viti Levu zoom {b:?}");
    let islands = l.get("/api/search?q=islands")?.json()?;
    let want: BTreeSet<&str> = catalog.countries.iter().filter(|e| e.name.to_lowercase().contains("islands")).map(|e| e.code.as_str()).collect();
    let got: BTreeSet<&str> = islands
        .as_array()
        .unwrap()
        .iter()
        .filter(|h| h["kind"] == "country")
        .map(|h| h["code"].as_str().unwrap())
        .collect();
    ensure!(got == want, "search islands {got:?} vs {want:?}");
    ensure!(l.get("/api/search?q=")?.status == 400, "empty search accepted");

    // measure
    let m = l.get("/api/measure?path=0,0;90,0;180,0&mode=distance")?.json()?;
    let half = std::f64::consts::PI * R_AUTH;
    ensure!((m["value"].as_f64().unwrap() - half).abs() < 1e-6 * half, "half circumference {}", m["value"]);
    let ring = [(178.0, -17.0), (179.0, -17.0), (179.0, -18.0), (178.0, -18.0)];
    let path: Vec<String> = ring.iter().map(|p| format!("{},{}", p.0, p.1)).collect();
    let a = l.get(&format!("/api/measure?path={}&mode=area", path.join(";")))?.json()?;
    let want = fan_excess_area(&ring);
    ensure!((a["value"].as_f64().unwrap() - want).abs() < 1e-6 * want, "area {} vs {want}", a["value"]);

    // legend
    let legend = l.get("/api/legend?warehouse=FJ&scale_denom=250000")?.json()?;
    let groups: Vec<&str> = legend["groups"].as_array().unwrap().iter().map(|g| g["group"].as_str().unwrap()).collect();
    ensure!(groups.contains(&"general-reference") && groups.contains(&"environment"), "groups {groups:?}");
    let visible = |lg: &Value, name: &str| {
        lg["groups"]
            .as_array()
            .unwrap()
            .iter()
            .flat_map(|g| g["layers"].as_array().unwrap())
            .find(|e| e["name"] == name)
            .map(|e| e["visible"] == true)
    };
    ensure!(visible(&legend, "rivers") == Some(false), "rivers visible at 1:250000");
    let near = l.get("/api/legend?warehouse=FJ&scale_denom=100000")?.json()?;
    ensure!(visible(&near, "rivers") == Some(true), "rivers hidden at its window edge");

    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 120.0, "took {secs:.1} s");
    *live = Some(l);
    Ok(format!("13 warehouses through the CLI, caches identical to library build, {secs:.1} s"))
}

// ---------------------------------------------------------------------------
// Catalog fidelity.

// code, name, capital, population, area km², coastline km
const TABLE_1: [(&str, &str, Option<&str>, u64, u64, u64); 12] = [
    ("CK", "Cook Islands", Some("Rarotonga"), 21008, 240, 120),
    ("FJ", "Fiji Islands", Some("Suva"), 868531, 18270, 1129),
    ("KI", "Kiribati", Some("Bairiki"), 98549, 811, 1143),
    ("MH", "Marshall Islands", Some("Majuro"), 56429, 182, 370),
    ("NR", "Nauru", Some("Yaren"), 12570, 21, 30),
    ("NU", "Niue", Some("Alofi"), 2145, 260, 64),
    ("TK", "Tokelau", None, 1418, 10, 101),
    ("TO", "Tonga", Some("Nuku'alofa"), 108141, 748, 419),
    ("TV", "Tuvalu", Some("Funafuti"), 11305, 26, 24),
    ("SB", "Solomon Islands", Some("Honiara"), 509190, 28450, 5313),
    ("VU", "Vanuatu", Some("Port Vila"), 199414, 12200, 2528),
    ("WS", "Western Samoa", Some("Apia"), 178173, 2944, 403),
];

const TABLE_2: [(u32, &[&str]); 3] = [
    (250_000, &["FJ", "SB", "VU", "WS"]),
    (100_000, &["CK", "TO", "TV"]),
    (50_000, &["KI", "MH", "NR", "NU", "TK"]),
];

const TABLE_3: [(&str, &[&str]); 7] = [
    ("CK", &["Northern Group", "Southern Group", "Rarotonga"]),
    ("FJ", &[
        "Viti Levu",
        "Vanua Levu / Taveuni",
        "Yassawa / Mamanucas",
        "Lomaiviti Group",
        "Lau group",
        "Kadavu group",
        "Rotuma",
    ]),
    ("KI", &["Gilbert Islands", "Line Islands", "Phoenix Islands"]),
    ("SB", &["Temotu", "Makira-Ulawa", "Malaita", "Guadalcanal / Central", "Isabel", "Western / Choiseul"]),
    ("TO", &["Vavau group", "Haapai group", "Tongatapu / Ata"]),
    ("VU", &[
        "Efate",
        "Tafea",
        "Shepherds",
        "Epi",
        "Paama",
        "Ambrym",
        "Pentecost",
        "Malakula",
        "Ambae-Maewo",
        "Santo-Malo",
        "Banks-Torres",
    ]),
    ("WS", &["Upolu", "Savaii"]),
];

const SINGLE_ENTRY: [&str; 5] = ["MH", "NR", "NU", "TK", "TV"];

fn catalog_fidelity(live: Option<&Live>) -> Check {
    let l = live.ok_or("no live server")?;
    let start = Instant::now();
    let r = l.get("/api/countries")?;
    ensure!(r.status == 200, "status {}", r.status);
    let v = r.json()?;
    let countries = v["countries"].as_array().ok_or("no countries array")?;
    ensure!(countries.len() == 12, "{} countries", countries.len());
    let by_code: BTreeMap<&str, &Value> = countries.iter().map(|c| (c["code"].as_str().unwrap(), c)).collect();

    for (code, name, capital, pop, area, coast) in TABLE_1 {
        let c = by_code.get(code).ok_or(format!("{code} missing"))?;
        ensure!(c["name"] == name, "{code} name {}", c["name"]);
        ensure!(c["capital"] == serde_json::to_value(capital).unwrap(), "{code} capital {}", c["capital"]);
        let got = (c["population"].as_u64(), c["area_km2"].as_u64(), c["coastline_km"].as_u64());
        ensure!(got == (Some(pop), Some(area), Some(coast)), "{code} figures {got:?}");
    }
    for (scale, codes) in TABLE_2 {
        let got: Vec<&str> = by_code.iter().filter(|(_, c)| c["base_scale_denom"] == scale).map(|(k, _)| *k).collect();
        ensure!(got == codes, "1:{scale} countries {got:?}");
    }
    ensure!(v["region"]["base_scale_denom"] == 1_000_000, "region scale {}", v["region"]["base_scale_denom"]);

    let site_names = |c: &Value| -> Vec<String> {
        c["sites"].as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap().to_string()).collect()
    };
    for (code, sites) in TABLE_3 {
        let got = site_names(by_code[code]);
        ensure!(got == sites, "{code} sites {got:?}");
        ensure!(by_code[code]["sites"].as_array().unwrap().iter().all(|s| s["whole_country"] != true), "{code} whole-country flag");
    }
    let single: Vec<&str> = by_code
        .iter()
        .filter(|(_, c)| {
            let sites = c["sites"].as_array().unwrap();
            sites.len() == 1 && sites[0]["whole_country"] == true
        })
        .map(|(k, _)| *k)
        .collect();
    ensure!(single == SINGLE_ENTRY, "single-entry countries {single:?}");
    for code in SINGLE_ENTRY {
        ensure!(site_names(by_code[code]) == [by_code[code]["name"].as_str().unwrap()], "{code} entry name");
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 1.0, "took {secs:.3} s");
    Ok(format!(
        "12 countries, 4/3/5 base scales + region 1:1000000, sites FJ 7 VU 11 SB 6 TO 3 CK 3 KI 3 WS 2, {} single-entry ({})",
        single.len(),
        single.join(" ")
    ))
}

// ---------------------------------------------------------------------------
// Geodesy.

fn random_tm(rng: &mut ChaCha8Rng) -> ProjectionSpec {
    let ells = [Ellipsoid::WGS84, Ellipsoid::INTERNATIONAL_1924, Ellipsoid::CLARKE_1866, Ellipsoid::CLARKE_1880];
    ProjectionSpec::transverse_mercator(
        rng.gen_range(0.0..360.0),
        rng.gen_range(-60.0..60.0),
        rng.gen_range(0.9990..1.0005),
        rng.gen_range(0.0..2_000_000.0),
        rng.gen_range(0.0..10_000_000.0),
        ells[rng.gen_range(0..ells.len())],
    )
    .unwrap()
}

fn projection_round_trip() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let spec = random_tm(&mut rng);
        let proj = spec.projector();
        for _ in 0..500 {
            let p = GeoPoint::new(spec.central_meridian() + rng.gen_range(-5.999..5.999), rng.gen_range(-80.0..80.0)).unwrap();
            let back = proj.inverse(&proj.forward(&p).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            worst = worst.max(delta_lon(back.lon(), p.lon()).abs()).max((back.lat() - p.lat()).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(worst <= 1e-9, "worst error {worst:e} deg");
    ensure!(secs < 5.0, "took {secs:.2} s");
    Ok(format!("10000 points over 20 specs, worst {worst:.1e} deg"))
}

fn datum_and_affine_oracles() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut helmert_worst: f64 = 0.0;
    for _ in 0..1000 {
        let t = [rng.gen_range(-500.0..500.0), rng.gen_range(-500.0..500.0), rng.gen_range(-500.0..500.0)];
        let r = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let ds = rng.gen_range(-10.0..10.0);
        let xyz = [rng.gen_range(-6.4e6..6.4e6), rng.gen_range(-6.4e6..6.4e6), rng.gen_range(-6.4e6..6.4e6)];
        let want = helmert_matrix(t, r, ds, xyz);
        let shift = DatumShift::seven(t[0], t[1], t[2], r[0], r[1], r[2], ds).unwrap();
        let got = helmert_shift(&shift, &Geocentric { x: xyz[0], y: xyz[1], z: xyz[2] });
        for (g, w) in [got.x, got.y, got.z].iter().zip(want) {
            helmert_worst = helmert_worst.max((g - w).abs());
        }
    }
    ensure!(helmert_worst < 1e-6, "Helmert differs by {helmert_worst:e} m");

    let pp = |x: f64, y: f64| ProjectedPoint::new(x, y).unwrap();
    let mut fit_worst: f64 = 0.0;
    for _ in 0..200 {
        let t = AffineTransform::new(
            rng.gen_range(0.5..2.0),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-1e5..1e5),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(0.5..2.0),
            rng.gen_range(-1e5..1e5),
        )
        .unwrap();
        let n = rng.gen_range(4..12);
        let src: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen_range(-5e3..5e3), rng.gen_range(-5e3..5e3))).collect();
        let dst: Vec<(f64, f64)> = src
            .iter()
            .map(|&(x, y)| {
                let q = t.apply(&pp(x, y)).unwrap();
                (q.x() + rng.gen_range(-5.0..5.0), q.y() + rng.gen_range(-5.0..5.0))
            })
            .collect();
        let pairs: Vec<ControlPointPair> =
            src.iter().zip(&dst).map(|(a, b)| ControlPointPair { source: pp(a.0, a.1), target: pp(b.0, b.1) }).collect();
        let fit = fit_affine(&pairs).map_err(|e| e.to_string())?;
        let (c, rms) = affine_lstsq(&src, &dst);
        for &(x, y) in &src {
            let got = fit.transform.apply(&pp(x, y)).unwrap();
            let want = (c[0] * x + c[1] * y + c[2], c[3] * x + c[4] * y + c[5]);
            fit_worst = fit_worst.max((got.x() - want.0).abs()).max((got.y() - want.1).abs());
        }
        fit_worst = fit_worst.max((fit.rms - rms).abs());
    }
    ensure!(fit_worst < 1e-6, "affine fit differs by {fit_worst:e} m");

    let mut recovery: f64 = 0.0;
    for _ in 0..50 {
        let t = AffineTransform::new(
            rng.gen_range(0.5..2.0),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-1e5..1e5),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(0.5..2.0),
            rng.gen_range(-1e5..1e5),
        )
        .unwrap();
        let pairs: Vec<ControlPointPair> = (0..8)
            .map(|_| {
                let s = pp(rng.gen_range(-5e3..5e3), rng.gen_range(-5e3..5e3));
                ControlPointPair { source: s, target: t.apply(&s).unwrap() }
            })
            .collect();
        recovery = recovery.max(fit_affine(&pairs).map_err(|e| e.to_string())?.rms);
    }
    ensure!(recovery < 1e-9, "synthetic recovery rms {recovery:e} m");
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 5.0, "took {secs:.2} s");
    Ok(format!("Helmert {helmert_worst:.1e} m, affine fit {fit_worst:.1e} m, recovery rms {recovery:.1e} m"))
}

// ---------------------------------------------------------------------------
// Antimeridian.

fn ring_positions(v: &Value, out: &mut Vec<(f64, f64)>) {
    match v.as_array() {
        Some(a) if a.len() >= 2 && a[0].is_number() => out.push((a[0].as_f64().unwrap(), a[1].as_f64().unwrap())),
        Some(a) => a.iter().for_each(|x| ring_positions(x, out)),
        None => {}
    }
}

fn antimeridian_contiguity(live: Option<&Live>) -> Check {
    let l = live.ok_or("no live server")?;
    let mut gaps = Vec::new();
    for (bbox, scale) in [([177.5, -16.0, 184.0, -15.0], 250_000), ([-182.5, -16.0, -176.0, -15.0], 50_000)] {
        let r = l.get(&format!("/api/features?warehouse=FJ&layer=coastline&bbox={}&scale_denom={scale}", bbox_q(bbox)))?;
        ensure!(r.status == 200, "features status {}", r.status);
        let v = r.json()?;
        let matching: Vec<&Value> =
            v["features"].as_array().unwrap().iter().filter(|f| f["id"].as_u64() == Some(DATELINE_FEATURE_ID)).collect();
        ensure!(matching.len() == 1, "{} copies of the dateline feature", matching.len());
        let g = &matching[0]["geometry"];
        let rings: Vec<Value> = match g["type"].as_str() {
            Some("Polygon") => g["coordinates"].as_array().unwrap().clone(),
            Some("MultiPolygon") => g["coordinates"].as_array().unwrap().iter().flat_map(|p| p.as_array().unwrap().clone()).collect(),
            other => return Err(format!("geometry type {other:?}")),
        };
        ensure!(rings.len() == 1, "{} rings, the feature was split", rings.len());
        let mut ring = Vec::new();
        ring_positions(&rings[0], &mut ring);
        ensure!(ring.iter().all(|p| (0.0..360.0).contains(&p.0)), "longitude outside [0, 360)");
        let gap = ring.windows(2).map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1)).fold(0.0, f64::max);
        ensure!(gap < 1.0, "vertex gap {gap} deg");
        let (lo, hi) = ring.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
        ensure!(lo <= 178.0 + 1e-6 && hi >= 183.0 - 1e-6, "spans {lo}..{hi}");
        gaps.push(format!("1:{scale} {} vertices, max gap {gap:.3} deg", ring.len()));
    }
    Ok(format!("one ring over 178..183 via CLI ingest and /api/features; {}", gaps.join(", ")))
}

// ---------------------------------------------------------------------------
// Cache against brute force.

struct Corpus {
    _dir: tempfile::TempDir,
    cache: SmartCache,
    boxes: Vec<[f64; 4]>,
    shapes: Vec<Vec<(Vec<Vec<(f64, f64)>>, bool)>>,
    build_secs: f64,
}

fn shape(g: &Geometry<ProjectedPoint>) -> Vec<(Vec<Vec<(f64, f64)>>, bool)> {
    let conv = |r: &Vec<ProjectedPoint>| r.iter().map(|p| (p.x(), p.y())).collect::<Vec<_>>();
    match g {
        Geometry::Point(p) => vec![(vec![vec![(p.x(), p.y())]], false)],
        Geometry::PolyLine(v) => vec![(vec![conv(v)], false)],
        Geometry::Polygon(r) => vec![(r.iter().map(conv).collect(), true)],
        Geometry::MultiPolygon(ps) => ps.iter().map(|r| (r.iter().map(conv).collect(), true)).collect(),
    }
}

fn corpus() -> Result<Corpus, String> {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let fj = AtlasCatalog::builtin().entry("FJ").unwrap().clone();
    let w = corpus_warehouse("FJ", 100_000, 2003, fj.extent).map_err(|e| e.to_string())?;
    let spec = CacheSpec::all_vector_layers(&w, fj.projection, fj.base_scale_denom);
    let path = dir.path().join("corpus.pisc");
    build_cache(&w, &spec, &path).map_err(|e| e.to_string())?;
    let cache = open_cache(&path).map_err(|e| e.to_string())?;
    let feats = cache.layer("parcels").unwrap().features();
    let shapes: Vec<_> = feats.iter().map(|f| shape(&f.geometry)).collect();
    let boxes = shapes
        .iter()
        .map(|sh| {
            sh.iter().flat_map(|(r, _)| r.iter().flatten()).fold(
                [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
                |b, &(x, y)| [b[0].min(x), b[1].min(y), b[2].max(x), b[3].max(y)],
            )
        })
        .collect();
    Ok(Corpus {
        _dir: dir,
        cache,
        boxes,
        shapes,
        build_secs: start.elapsed().as_secs_f64(),
    })
}

fn cache_oracle_equivalence(c: &Corpus) -> Check {
    let start = Instant::now();
    let feats = c.cache.layer("parcels").unwrap().features();
    ensure!(feats.len() == 100_000, "{} features", feats.len());
    let ext = c.cache.layer("parcels").unwrap().index().bounds().unwrap();
    let (w, h) = (ext[2] - ext[0], ext[3] - ext[1]);
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let mut bbox_hits = 0usize;
    for i in 0..10_000 {
        let frac = match i % 20 {
            0 => 0.2,
            1..=4 => 0.03,
            _ => 0.003,
        };
        let x = rng.gen_range(ext[0] - 0.05 * w..ext[2]);
        let y = rng.gen_range(ext[1] - 0.05 * h..ext[3]);
        let q = [x, y, x + rng.gen_range(0.0..frac) * w, y + rng.gen_range(0.0..frac) * h];
        let got: Vec<u64> = c.cache.query_bbox("parcels", &q).map_err(|e| e.to_string())?.iter().map(|f| f.id).collect();
        let want: Vec<u64> = (0..feats.len())
            .filter(|&k| {
                let b = &c.boxes[k];
                b[0] <= q[2] && q[0] <= b[2] && b[1] <= q[3] && q[1] <= b[3]
            })
            .filter(|&k| c.shapes[k].iter().any(|(r, poly)| shape_meets_rect(r, *poly, q)))
            .map(|k| feats[k].id)
            .collect();
        ensure!(got == want, "bbox {q:?}: {} hits vs oracle {}", got.len(), want.len());
        bbox_hits += got.len();
    }
    let mut point_hits = 0usize;
    for _ in 0..1_000 {
        let p = (rng.gen_range(ext[0]..ext[2]), rng.gen_range(ext[1]..ext[3]));
        let tol = rng.gen_range(10.0..3000.0);
        let got: BTreeSet<u64> = c
            .cache
            .query_point("parcels", &ProjectedPoint::new(p.0, p.1).unwrap(), tol)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|h| h.feature.id)
            .collect();
        let want: BTreeSet<u64> = (0..feats.len())
            .filter(|&k| {
                let b = &c.boxes[k];
                b[0] - tol <= p.0 && p.0 <= b[2] + tol && b[1] - tol <= p.1 && p.1 <= b[3] + tol
            })
            .filter(|&k| c.shapes[k].iter().any(|(r, poly)| shape_distance(r, *poly, p) <= tol))
            .map(|k| feats[k].id)
            .collect();
        ensure!(got == want, "point {p:?} tol {tol}: {} hits vs oracle {}", got.len(), want.len());
        point_hits += got.len();
    }
    let secs = start.elapsed().as_secs_f64() + c.build_secs;
    ensure!(secs < 60.0, "took {secs:.1} s");
    Ok(format!(
        "100000 features; 10000 bbox queries ({bbox_hits} hits) and 1000 point queries ({point_hits} hits) equal brute force; build {:.1} s",
        c.build_secs
    ))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn cache_performance(c: &Corpus) -> Check {
    let ext = c.cache.layer("parcels").unwrap().index().bounds().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(62);
    let queries: Vec<[f64; 4]> = (0..300)
        .map(|_| {
            let x = rng.gen_range(ext[0]..ext[2] - 2000.0);
            let y = rng.gen_range(ext[1]..ext[3] - 2000.0);
            [x, y, x + 2000.0, y + 2000.0]
        })
        .collect();
    let (mut indexed, mut scanned) = (Vec::new(), Vec::new());
    for q in &queries {
        let t = Instant::now();
        let a = c.cache.query_bbox("parcels", q).unwrap();
        indexed.push(t.elapsed().as_secs_f64());
        let t = Instant::now();
        let b = c.cache.scan_bbox("parcels", q).unwrap();
        scanned.push(t.elapsed().as_secs_f64());
        ensure!(a == b, "index and scan disagree on {q:?}");
    }
    let (mi, ms) = (median(indexed), median(scanned));
    let ratio = ms / mi;
    ensure!(ratio >= 10.0, "indexed median {:.1} us vs scan {:.1} us, only {ratio:.1}x", mi * 1e6, ms * 1e6);
    Ok(format!("2 km boxes, median indexed {:.1} us vs scan {:.1} us, {ratio:.0}x", mi * 1e6, ms * 1e6))
}

// ---------------------------------------------------------------------------
// Rebuild semantics.

fn rebuild_semantics() -> Check {
    use std::os::unix::fs::MetadataExt;

    let dir = tempfile::tempdir().unwrap();
    let fj = AtlasCatalog::builtin().entry("FJ").unwrap().clone();
    let mut w = corpus_warehouse("FJ", 2_000, 5, fj.extent).map_err(|e| e.to_string())?;
    let spec = CacheSpec::all_vector_layers(&w, fj.projection, fj.base_scale_denom);
    let path = dir.path().join("fj.pisc");
    build_cache(&w, &spec, &path).map_err(|e| e.to_string())?;
    let first = std::fs::read(&path).unwrap();
    let again = rebuild_from(&w, &spec, &path).map_err(|e| e.to_string())?;
    ensure!(again.identical_to_previous, "rebuild of unchanged input not reported identical");
    ensure!(std::fs::read(&path).unwrap() == first, "rebuild of unchanged input changed bytes");

    let old = open_cache(&path).map_err(|e| e.to_string())?;
    let inode = std::fs::metadata(&path).unwrap().ino();
    let probe = [0.0, 0.0, 1e7, 2e7];
    let old_hits = old.query_bbox("parcels", &probe).unwrap().len();
    let extra = r#"{"type":"FeatureCollection","features":[{"type":"Feature","id":900001,
        "geometry":{"type":"Polygon","coordinates":[[[178.0,-17.0],[178.001,-17.0],[178.001,-16.999],[178.0,-16.999],[178.0,-17.0]]]},
        "properties":{}}]}"#;
    w.ingest("parcels", extra, &IngestOptions::default()).map_err(|e| e.to_string())?;
    let report = rebuild_from(&w, &spec, &path).map_err(|e| e.to_string())?;
    ensure!(!report.identical_to_previous, "changed input reported identical");
    let new = open_cache(&path).map_err(|e| e.to_string())?;
    ensure!(std::fs::metadata(&path).unwrap().ino() != inode, "file rewritten in place, not replaced");
    ensure!(new.layer("parcels").unwrap().features().len() == 2_001, "rebuilt count");
    ensure!(old.layer("parcels").unwrap().features().len() == 2_000, "old handle changed");
    ensure!(old.query_bbox("parcels", &probe).unwrap().len() == old_hits, "old handle queries changed");
    ensure!(old.to_bytes() == first, "old handle no longer matches its snapshot");
    let leftovers: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.contains(".tmp"))
        .collect();
    ensure!(leftovers.is_empty(), "temporary files left: {leftovers:?}");

    // Interface check: the cache handle exposes no mutating methods, and
    // the module documents a compile-fail example for in-place updates.
    let src_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/src/smartcache");
    let mut mutators = Vec::new();
    let mut has_compile_fail = false;
    for entry in std::fs::read_dir(&src_dir).unwrap() {
        let p: PathBuf = entry.unwrap().path();
        let text = std::fs::read_to_string(&p).unwrap();
        has_compile_fail |= text.contains("```compile_fail");
        for line in text.lines().map(str::trim) {
            let public = line.starts_with("pub fn");
            let named = ["insert", "update", "delete", "remove", "append", "upsert", "patch"]
                .iter()
                .any(|w| line.starts_with(&format!("pub fn {w}")));
            if public && (line.contains("&mut self") || named) {
                mutators.push(line.to_string());
            }
        }
    }
    ensure!(mutators.is_empty(), "mutating cache API: {mutators:?}");
    ensure!(has_compile_fail, "no compile-fail interface example");
    Ok("unchanged rebuild byte-identical; changed rebuild replaced the file atomically, old handle intact; no mutating API".into())
}

// ---------------------------------------------------------------------------
// Pipeline idempotence and the offline bundle.

fn pipeline_idempotence(live: Option<&Live>) -> Check {
    let l = live.ok_or("no live data directory")?;
    let d = s(l.dir.path());
    for wf in &l.manifest.warehouses {
        let clean = atlas_bin(&["--data-dir", d, "clean", "--warehouse", &wf.code])?;
        ensure!(clean["changes"] == 0, "{} second clean changed {}", wf.code, clean["changes"]);
        let merge = atlas_bin(&["--data-dir", d, "merge", "--warehouse", &wf.code])?;
        ensure!(merge["merged"] == 0, "{} second merge merged {}", wf.code, merge["merged"]);
    }
    ensure!(l.first_clean_changes > 0 && l.first_merges > 0, "first runs did no work");
    Ok(format!(
        "13 warehouses; first runs {} clean changes and {} merges, second runs zero",
        l.first_clean_changes, l.first_merges
    ))
}

fn scripted_requests(catalog: &AtlasCatalog, layers: &BTreeMap<String, String>) -> Vec<String> {
    let mut v = vec!["/api/countries".to_string()];
    for e in catalog.entries() {
        let code = &e.code;
        let ext = bbox_q(e.extent);
        let site = e.sites[0].bbox;
        v.push(format!("/api/legend?warehouse={code}"));
        v.push(format!("/api/map?warehouse={code}&bbox={ext}&width=256&height=192"));
        v.push(format!("/api/map?warehouse={code}&bbox={}&width=200&height=200&scale_denom=250000", bbox_q(site)));
        if let Some(layer) = layers.get(code) {
            v.push(format!("/api/features?warehouse={code}&layer={layer}&bbox={ext}"));
        }
        v.push(format!(
            "/api/identify?warehouse={code}&lon={}&lat={}&tolerance_px=8",
            (site[0] + site[2]) / 2.0,
            (site[1] + site[3]) / 2.0
        ));
    }
    for q in ["viti", "islands", "climate", "group", "zzz"] {
        v.push(format!("/api/search?q={q}"));
    }
    v.push("/api/measure?path=178,-17;179,-17;179,-18&mode=area".into());
    v.push("/api/measure?path=0,0;90,0;180,0".into());
    v.push("/api/map?warehouse=ZZ&bbox=1,1,2,2&width=64&height=64".into());
    v
}

fn offline_bundle(live: Option<&Live>) -> Check {
    let l = live.ok_or("no live server")?;
    let out = tempfile::tempdir().unwrap();
    let bundle = out.path().join("bundle");
    atlas_bin(&["export-offline", "--config", s(&l.dir.path().join("atlas.toml")), "--out", s(&bundle)])?;
    // Relocate before serving: bundles must not depend on their path.
    let moved = out.path().join("cd-rom");
    std::fs::rename(&bundle, &moved).unwrap();
    let offline = ServerProc::spawn(&moved.join("atlas.toml"))?;

    let catalog = AtlasCatalog::builtin();
    let mut layers = BTreeMap::new();
    for e in catalog.entries() {
        let lg = l.get(&format!("/api/legend?warehouse={}", e.code))?.json()?;
        if let Some(name) = lg["groups"][0]["layers"][0]["name"].as_str() {
            layers.insert(e.code.clone(), name.to_string());
        }
    }
    let requests = scripted_requests(&catalog, &layers);
    let mut bytes = 0;
    for path in &requests {
        let a = l.get(path)?;
        let b = http_get(&l.agent, &offline.url, path)?;
        ensure!(a.status == b.status && a.headers == b.headers, "{path}: status or headers differ");
        ensure!(a.body == b.body, "{path}: body differs");
        bytes += a.body.len();
    }
    Ok(format!("{} requests, {bytes} bytes identical from a relocated bundle", requests.len()))
}

fn main() {
    let mut live = None;
    let mut results = Vec::new();
    let e2e = run_check("end-to-end smoke", || end_to_end(&mut live));
    results.push(run_check("catalog fidelity", || catalog_fidelity(live.as_ref())));
    results.push(run_check("projection round trip", projection_round_trip));
    results.push(run_check("datum and affine oracles", datum_and_affine_oracles));
    results.push(run_check("antimeridian contiguity", || antimeridian_contiguity(live.as_ref())));
    let corpus = corpus();
    results.push(run_check("cache/oracle equivalence", || cache_oracle_equivalence(corpus.as_ref().map_err(Clone::clone)?)));
    results.push(run_check("cache performance", || cache_performance(corpus.as_ref().map_err(Clone::clone)?)));
    results.push(run_check("rebuild semantics", rebuild_semantics));
    results.push(run_check("pipeline idempotence", || pipeline_idempotence(live.as_ref())));
    results.push(e2e);
    results.push(run_check("offline bundle", || offline_bundle(live.as_ref())));
    drop(live);
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
