//! HTTP front end for [`atlas_core::service::Atlas`].
//!
//! Every `/api` route is a thin adapter: parse query parameters, run the
//! operation on a blocking thread, and encode the result. Errors are JSON
//! bodies `{code, message, detail}` with status 400, 404 or 500.

use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use atlas_core::geo::GeoPoint;
use atlas_core::service::{
    measure, Atlas, AtlasConfig, BboxCrs, FeatureRequest, IdentifyRequest, MapRequest, MeasureMode, ServiceError,
    BUILTIN_INDEX_HTML,
};
use axum::extract::rejection::QueryRejection;
use axum::extract::{Query, State};
use axum::http::{header, HeaderName, HeaderValue, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde_json::json;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;

/// Wrapper so `ServiceError` can be returned from handlers.
#[derive(Debug)]
pub struct ApiError(pub ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            tracing::error!(code = %self.0.code, "{}", self.0.message);
        }
        (status, Json(self.0)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;
type Params = HashMap<String, String>;

fn params(q: Result<Query<Params>, QueryRejection>) -> ApiResult<Params> {
    q.map(|Query(p)| p)
        .map_err(|e| ServiceError::bad_request("invalid_query_string", e.body_text()).into())
}

fn required<'a>(p: &'a Params, name: &str) -> Result<&'a str, ServiceError> {
    p.get(name)
        .map(String::as_str)
        .ok_or_else(|| ServiceError::bad_request("missing_parameter", format!("parameter '{name}' is required")))
}

fn parse_f64(name: &str, s: &str) -> Result<f64, ServiceError> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ServiceError::bad_request("invalid_parameter", format!("parameter '{name}' must be a number, got '{s}'")))
}

fn parse_u32(name: &str, s: &str) -> Result<u32, ServiceError> {
    s.trim()
        .parse()
        .map_err(|_| ServiceError::bad_request("invalid_parameter", format!("parameter '{name}' must be a positive integer, got '{s}'")))
}

/// `minx,miny,maxx,maxy`.
fn parse_bbox(s: &str) -> Result<[f64; 4], ServiceError> {
    let v: Vec<&str> = s.split(',').collect();
    if v.len() != 4 {
        return Err(ServiceError::bad_request(
            "invalid_bbox",
            format!("bbox must be 'minx,miny,maxx,maxy', got '{s}'"),
        ));
    }
    let mut out = [0.0; 4];
    for (o, t) in out.iter_mut().zip(v) {
        *o = parse_f64("bbox", t)?;
    }
    Ok(out)
}

/// Absent or `auto` means "let the service choose".
fn parse_scale(p: &Params) -> Result<Option<f64>, ServiceError> {
    match p.get("scale_denom").map(|s| s.trim()) {
        None | Some("") | Some("auto") => Ok(None),
        Some(s) => parse_f64("scale_denom", s).map(Some),
    }
}

/// Absent means every layer; empty or `none` means no layers.
fn parse_layers(p: &Params) -> Option<Vec<String>> {
    p.get("layers").map(|s| match s.trim() {
        "" | "none" => Vec::new(),
        s => s.split(',').map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect(),
    })
}

fn parse_crs(p: &Params) -> Result<BboxCrs, ServiceError> {
    p.get("crs").map_or(Ok(BboxCrs::default()), |s| s.parse())
}

/// `lon,lat;lon,lat;...`.
fn parse_path(s: &str) -> Result<Vec<GeoPoint>, ServiceError> {
    s.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let (lon, lat) = t
                .split_once(',')
                .ok_or_else(|| ServiceError::bad_request("invalid_path", format!("path vertex '{t}' must be 'lon,lat'")))?;
            GeoPoint::new(parse_f64("path", lon)?, parse_f64("path", lat)?)
                .map_err(|e| ServiceError::bad_request("invalid_path", e.to_string()))
        })
        .collect()
}

fn header_value(s: impl ToString) -> HeaderValue {
    HeaderValue::from_str(&s.to_string()).unwrap_or_else(|_| HeaderValue::from_static("-"))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::internal(format!("worker failed: {e}")))?
        .map_err(ApiError)
}

type AppState = Arc<Atlas>;

async fn countries(State(atlas): State<AppState>) -> Response {
    Json(atlas.catalog().clone()).into_response()
}

async fn map(State(atlas): State<AppState>, q: Result<Query<Params>, QueryRejection>) -> ApiResult<Response> {
    let p = params(q)?;
    let req = MapRequest {
        code: required(&p, "warehouse")?.to_string(),
        bbox: parse_bbox(required(&p, "bbox")?)?,
        bbox_crs: parse_crs(&p)?,
        width: parse_u32("width", required(&p, "width")?)?,
        height: parse_u32("height", required(&p, "height")?)?,
        layers: parse_layers(&p),
        scale_denom: parse_scale(&p)?,
    };
    let img = blocking(move || atlas.render_map(&req)).await?;
    let b = img.bbox;
    let headers = [
        (header::CONTENT_TYPE, HeaderValue::from_static("image/png")),
        (HeaderName::from_static("x-scale-denom"), header_value(img.scale_denom)),
        (HeaderName::from_static("x-layers"), header_value(img.layers.join(","))),
        (HeaderName::from_static("x-bbox"), header_value(format!("{},{},{},{}", b[0], b[1], b[2], b[3]))),
    ];
    Ok((headers, img.png).into_response())
}

async fn features(State(atlas): State<AppState>, q: Result<Query<Params>, QueryRejection>) -> ApiResult<Response> {
    let p = params(q)?;
    let req = FeatureRequest {
        code: required(&p, "warehouse")?.to_string(),
        layer: required(&p, "layer")?.to_string(),
        bbox: parse_bbox(required(&p, "bbox")?)?,
        bbox_crs: parse_crs(&p)?,
        scale_denom: parse_scale(&p)?,
    };
    let r = blocking(move || atlas.get_features(&req)).await?;
    let headers = [
        (header::CONTENT_TYPE, HeaderValue::from_static("application/geo+json")),
        (HeaderName::from_static("x-scale-denom"), header_value(r.scale_denom)),
        (HeaderName::from_static("x-feature-count"), header_value(r.count)),
        (HeaderName::from_static("x-payload-bytes"), header_value(r.payload_bytes)),
        (HeaderName::from_static("x-transfer-seconds"), header_value(format!("{:.3}", r.transfer_seconds))),
    ];
    Ok((headers, r.body).into_response())
}

async fn identify(State(atlas): State<AppState>, q: Result<Query<Params>, QueryRejection>) -> ApiResult<Response> {
    let p = params(q)?;
    let req = IdentifyRequest {
        code: required(&p, "warehouse")?.to_string(),
        lon: parse_f64("lon", required(&p, "lon")?)?,
        lat: parse_f64("lat", required(&p, "lat")?)?,
        tolerance_px: match p.get("tolerance_px") {
            Some(s) => parse_f64("tolerance_px", s)?,
            None => atlas_core::tolerances::DEFAULT_IDENTIFY_TOL_PX,
        },
        scale_denom: parse_scale(&p)?,
        layers: parse_layers(&p),
    };
    let r = blocking(move || atlas.identify(&req)).await?;
    Ok(Json(r).into_response())
}

async fn search(State(atlas): State<AppState>, q: Result<Query<Params>, QueryRejection>) -> ApiResult<Response> {
    let p = params(q)?;
    let text = p.get("q").cloned().unwrap_or_default();
    Ok(Json(atlas.search(&text)?).into_response())
}

async fn measure_route(q: Result<Query<Params>, QueryRejection>) -> ApiResult<Response> {
    let p = params(q)?;
    let path = parse_path(required(&p, "path")?)?;
    let mode: MeasureMode = p.get("mode").map_or(Ok(MeasureMode::Distance), |s| s.parse())?;
    Ok(Json(measure(&path, mode)?).into_response())
}

async fn legend(State(atlas): State<AppState>, q: Result<Query<Params>, QueryRejection>) -> ApiResult<Response> {
    let p = params(q)?;
    let code = required(&p, "warehouse")?;
    Ok(Json(atlas.legend(code, parse_scale(&p)?)?).into_response())
}

async fn reload(State(atlas): State<AppState>) -> ApiResult<Response> {
    let r = blocking(move || atlas.reload()).await?;
    tracing::info!(loaded = r.loaded.len(), missing = ?r.missing, "caches reloaded");
    Ok(Json(r).into_response())
}

async fn health(State(atlas): State<AppState>) -> Response {
    Json(json!({"status": "ok", "loaded": atlas.loaded_codes()})).into_response()
}

async fn api_not_found() -> ApiError {
    ApiError(ServiceError::not_found("no_such_route", "no such API route"))
}

/// All routes, with static UI files served at `/`.
pub fn router(atlas: Arc<Atlas>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/countries", get(countries))
        .route("/api/map", get(map))
        .route("/api/features", get(features))
        .route("/api/identify", get(identify))
        .route("/api/search", get(search))
        .route("/api/measure", get(measure_route))
        .route("/api/legend", get(legend))
        .route("/api/admin/reload", get(reload).post(reload))
        .route("/api/{*rest}", get(api_not_found).post(api_not_found));
    let app = match atlas.config().static_dir.clone() {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api
            .route("/", get(|| async { Html(BUILTIN_INDEX_HTML) }))
            .route("/index.html", get(|| async { Html(BUILTIN_INDEX_HTML) })),
    };
    app.with_state(atlas).layer(TraceLayer::new_for_http())
}

/// Serves until `shutdown` resolves, then drains open connections.
pub async fn serve(
    atlas: Arc<Atlas>,
    listener: TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(atlas)).with_graceful_shutdown(shutdown).await
}

/// Resolves on ctrl-c or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutting down");
}

/// Reloads caches whenever the process receives SIGHUP.
#[cfg(unix)]
fn reload_on_hangup(atlas: Arc<Atlas>) {
    tokio::spawn(async move {
        let Ok(mut hup) = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::hangup()) else {
            return;
        };
        while hup.recv().await.is_some() {
            let a = atlas.clone();
            match tokio::task::spawn_blocking(move || a.reload()).await {
                Ok(Ok(r)) => tracing::info!(loaded = r.loaded.len(), missing = ?r.missing, "caches reloaded"),
                Ok(Err(e)) => tracing::error!("reload failed: {e}"),
                Err(e) => tracing::error!("reload worker failed: {e}"),
            }
        }
    });
}

/// Opens the atlas and serves on the configured address until a shutdown
/// signal arrives. `on_bound` sees the bound address.
pub async fn run(config: AtlasConfig, on_bound: impl FnOnce(SocketAddr)) -> Result<(), RunError> {
    let listen = config.listen.clone();
    let atlas = Arc::new(Atlas::open(config)?);
    let listener = TcpListener::bind(&listen).await.map_err(|e| RunError::Bind(listen, e))?;
    on_bound(listener.local_addr().map_err(RunError::Io)?);
    #[cfg(unix)]
    reload_on_hangup(atlas.clone());
    serve(atlas, listener, shutdown_signal()).await.map_err(RunError::Io)
}

#[derive(Debug)]
pub enum RunError {
    Service(ServiceError),
    Bind(String, std::io::Error),
    Io(std::io::Error),
}

impl From<ServiceError> for RunError {
    fn from(e: ServiceError) -> Self {
        RunError::Service(e)
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Service(e) => write!(f, "{e}"),
            RunError::Bind(addr, e) => write!(f, "cannot listen on {addr}: {e}"),
            RunError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RunError {}

/// A server on a background thread with its own runtime; dropped handles
/// shut the server down.
pub struct BackgroundServer {
    addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl BackgroundServer {
    /// Binds `127.0.0.1:0` and starts serving `atlas`.
    pub fn start(atlas: Arc<Atlas>) -> std::io::Result<BackgroundServer> {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
        let std_listener = std::net::TcpListener::bind("127.0.0.1:0")?;
        std_listener.set_nonblocking(true)?;
        let addr = std_listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            rt.block_on(async move {
                let listener = TcpListener::from_std(std_listener)?;
                serve(atlas, listener, async {
                    let _ = rx.await;
                })
                .await
            })
        });
        Ok(BackgroundServer {
            addr,
            stop: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    /// Stops accepting, drains connections and joins the thread.
    pub fn shutdown(mut self) -> std::io::Result<()> {
        self.stop_and_join()
    }

    fn stop_and_join(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        let _ = self.stop_and_join();
    }
}
