//! The HTTP API end to end over a real socket.

use std::sync::Arc;

use atlas_core::catalog::AtlasCatalog;
use atlas_core::fixtures::{build_data_dir, DEFAULT_SEED};
use atlas_core::service::*;
use atlas_server::BackgroundServer;
use serde_json::Value;

struct Env {
    _dir: tempfile::TempDir,
    atlas: Arc<Atlas>,
    server: BackgroundServer,
    agent: ureq::Agent,
}

fn env_with(static_dir: Option<&str>) -> Env {
    let dir = tempfile::tempdir().unwrap();
    build_data_dir(dir.path(), &AtlasCatalog::builtin(), DEFAULT_SEED).unwrap();
    let mut config = AtlasConfig::for_data_dir(dir.path());
    if let Some(s) = static_dir {
        let ui = dir.path().join("ui");
        std::fs::create_dir_all(&ui).unwrap();
        std::fs::write(ui.join("index.html"), s).unwrap();
        config.static_dir = Some(ui);
    }
    let atlas = Arc::new(Atlas::open(config).unwrap());
    let server = BackgroundServer::start(atlas.clone()).unwrap();
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    Env {
        _dir: dir,
        atlas,
        server,
        agent,
    }
}

struct Reply {
    status: u16,
    content_type: String,
    headers: Vec<(String, String)>,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap()
    }
    fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }
}

impl Env {
    fn get(&self, path: &str) -> Reply {
        let resp = self.agent.get(&self.server.url(path)).call().unwrap();
        Self::reply(resp)
    }

    fn post(&self, path: &str) -> Reply {
        let resp = self.agent.post(&self.server.url(path)).send_empty().unwrap();
        Self::reply(resp)
    }

    fn reply(mut resp: ureq::http::Response<ureq::Body>) -> Reply {
        let headers = resp
            .headers()
            .iter()
            .map(|(k, v)| (k.as_str().to_string(), v.to_str().unwrap_or("").to_string()))
            .collect();
        Reply {
            status: resp.status().as_u16(),
            content_type: resp
                .headers()
                .get("content-type")
                .map(|v| v.to_str().unwrap().to_string())
                .unwrap_or_default(),
            headers,
            body: resp.body_mut().read_to_vec().unwrap(),
        }
    }
}

fn assert_error(r: &Reply, status: u16, code: &str) {
    assert_eq!(r.status, status, "{}", String::from_utf8_lossy(&r.body));
    assert!(r.content_type.starts_with("application/json"));
    let v = r.json();
    assert_eq!(v["code"], code);
    assert!(v["message"].is_string());
    assert!(v.as_object().unwrap().contains_key("detail"));
}

#[test]
fn api_routes_match_direct_calls() {
    let env = env_with(None);
    let a = &env.atlas;

    let r = env.get("/api/countries");
    assert_eq!(r.status, 200);
    let cat: AtlasCatalog = serde_json::from_slice(&r.body).unwrap();
    assert_eq!(&cat, a.catalog());

    let r = env.get("/api/map?warehouse=FJ&bbox=176.8,-21.1,181.9,-12.4&crs=geographic&width=400&height=300&scale_denom=auto");
    assert_eq!(r.status, 200);
    assert_eq!(r.content_type, "image/png");
    let direct = a
        .render_map(&MapRequest {
            code: "FJ".into(),
            bbox: [176.8, -21.1, 181.9, -12.4],
            bbox_crs: BboxCrs::Geographic,
            width: 400,
            height: 300,
            layers: None,
            scale_denom: None,
        })
        .unwrap();
    assert!(r.body == direct.png);
    assert_eq!(r.header("x-layers"), Some(direct.layers.join(",").as_str()));
    assert_eq!(r.header("x-scale-denom").unwrap().parse::<f64>().unwrap(), direct.scale_denom);
    assert_eq!(r.header("x-bbox").unwrap().split(',').count(), 4);

    let r = env.get("/api/map?warehouse=FJ&bbox=176.8,-21.1,181.9,-12.4&width=64&height=64&layers=coastline,villages&scale_denom=250000");
    assert_eq!(r.header("x-layers"), Some("coastline,villages"));
    let r = env.get("/api/map?warehouse=FJ&bbox=176.8,-21.1,181.9,-12.4&width=64&height=64&layers=none");
    assert_eq!(r.header("x-layers"), Some(""));

    let r = env.get("/api/features?warehouse=FJ&layer=coastline&bbox=177.5,-16,184,-15&scale_denom=250000");
    assert_eq!(r.status, 200);
    assert_eq!(r.content_type, "application/geo+json");
    let direct = a
        .get_features(&FeatureRequest {
            code: "FJ".into(),
            layer: "coastline".into(),
            bbox: [177.5, -16.0, 184.0, -15.0],
            bbox_crs: BboxCrs::Geographic,
            scale_denom: Some(250_000.0),
        })
        .unwrap();
    assert_eq!(r.body, direct.body.as_bytes());
    assert_eq!(r.header("x-payload-bytes").unwrap(), direct.payload_bytes.to_string());
    assert_eq!(r.header("x-feature-count").unwrap(), direct.count.to_string());
    assert!(r.header("x-transfer-seconds").is_some());

    let r = env.get("/api/identify?warehouse=FJ&lon=177.9&lat=-17.8&tolerance_px=5&scale_denom=250000");
    assert_eq!(r.status, 200);
    let direct = a
        .identify(&IdentifyRequest {
            code: "FJ".into(),
            lon: 177.9,
            lat: -17.8,
            tolerance_px: 5.0,
            scale_denom: Some(250_000.0),
            layers: None,
        })
        .unwrap();
    assert_eq!(r.json(), serde_json::to_value(&direct).unwrap());

    let r = env.get("/api/search?q=viti");
    assert_eq!(r.json(), serde_json::to_value(a.search("viti").unwrap()).unwrap());
    let r = env.get("/api/search?q=western%20samoa");
    assert_eq!(r.json()[0]["code"], "WS");

    let r = env.get("/api/measure?path=178,-17;179,-17;179,-18&mode=area");
    assert_eq!(r.status, 200);
    let v = r.json();
    assert_eq!(v["unit"], "m2");
    assert_eq!(v["points"], 3);
    let r = env.get("/api/measure?path=178,-17;179,-17");
    assert_eq!(r.json()["mode"], "distance");

    let r = env.get("/api/legend?warehouse=FJ&scale_denom=100000");
    assert_eq!(r.json(), serde_json::to_value(a.legend("FJ", Some(100_000.0)).unwrap()).unwrap());

    let r = env.get("/api/health");
    assert_eq!(r.json()["loaded"].as_array().unwrap().len(), 13);

    let r = env.get("/");
    assert_eq!(r.status, 200);
    assert!(r.content_type.starts_with("text/html"));
    assert_eq!(r.body, BUILTIN_INDEX_HTML.as_bytes());
}

#[test]
fn errors_are_structured_json() {
    let env = env_with(None);
    assert_error(&env.get("/api/search?q="), 400, "query_required");
    assert_error(&env.get("/api/search"), 400, "query_required");
    assert_error(&env.get("/api/map?warehouse=FJ&bbox=1,2,3&width=10&height=10"), 400, "invalid_bbox");
    assert_error(&env.get("/api/map?warehouse=FJ&bbox=176.8,-21.1,181.9,-12.4&width=10&height=100"), 400, "invalid_size");
    assert_error(&env.get("/api/map?warehouse=FJ&width=100&height=100"), 400, "missing_parameter");
    assert_error(&env.get("/api/map?warehouse=FJ&bbox=176.8,-21.1,181.9,-12.4&width=abc&height=100"), 400, "invalid_parameter");
    assert_error(&env.get("/api/map?warehouse=ZZ&bbox=176.8,-21.1,181.9,-12.4&width=100&height=100"), 404, "unknown_warehouse");
    assert_error(&env.get("/api/features?warehouse=FJ&layer=roads&bbox=176.8,-21.1,181.9,-12.4"), 404, "unknown_layer");
    assert_error(&env.get("/api/features?warehouse=FJ&layer=coastline&bbox=176.8,-21.1,181.9,-12.4&crs=mercator"), 400, "invalid_crs");
    assert_error(&env.get("/api/identify?warehouse=FJ&lon=178&lat=-17&tolerance_px=0"), 400, "invalid_tolerance");
    assert_error(&env.get("/api/measure?path=178,-17&mode=volume"), 400, "invalid_mode");
    assert_error(&env.get("/api/legend?warehouse=FJ&scale_denom=-5"), 400, "invalid_scale");
    assert_error(&env.get("/api/nothing"), 404, "no_such_route");
}

#[test]
fn reload_endpoint_picks_up_missing_caches() {
    let env = env_with(None);
    let cache = env.atlas.config().data_dir.join("caches/NU.pisc");
    let saved = std::fs::read(&cache).unwrap();
    std::fs::remove_file(&cache).unwrap();
    let r = env.post("/api/admin/reload");
    assert_eq!(r.status, 200);
    assert_eq!(r.json()["missing"], serde_json::json!(["NU"]));
    assert_error(&env.get("/api/legend?warehouse=NU"), 404, "cache_missing");
    std::fs::write(&cache, saved).unwrap();
    let r = env.post("/api/admin/reload");
    assert_eq!(r.json()["missing"], serde_json::json!([]));
    assert_eq!(env.get("/api/legend?warehouse=NU").status, 200);
}

#[test]
fn static_dir_replaces_builtin_ui() {
    let env = env_with(Some("<p>custom</p>"));
    let r = env.get("/");
    assert_eq!(r.status, 200);
    assert_eq!(r.body, b"<p>custom</p>");
    assert_eq!(env.get("/missing.js").status, 404);
}

#[test]
fn shutdown_drains_and_stops() {
    let env = env_with(None);
    let addr = env.server.addr();
    assert_eq!(env.get("/api/health").status, 200);
    env.server.shutdown().unwrap();
    assert!(std::net::TcpStream::connect(addr).is_err());
}
