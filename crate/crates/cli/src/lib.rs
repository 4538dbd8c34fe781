//! The `atlas` operator tool.
//!
//! Each subcommand returns a [`CommandResult`]: an exit code from a fixed
//! taxonomy, a one-paragraph summary for humans, and a JSON report that is
//! written to `--report <path>` when asked for.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use atlas_core::catalog::AtlasCatalog;
use atlas_core::fixtures::{build_data_dir, write_fixtures, DEFAULT_SEED};
use atlas_core::geo::{fit_affine, AffineTransform, ControlPointPair, DatumShift, GeoError, SourceCrs};
use atlas_core::service::{Atlas, AtlasConfig, BundleOptions, ErrorKind, ServiceError};
use atlas_core::smartcache::{build_cache, open_cache, CacheError, CacheSpec, PublishedLayer};
use atlas_core::tolerances;
use atlas_core::warehouse::{
    create_warehouse, CleanOptions, CleanReport, GeometryKind, IngestOptions, LayerSpec, Warehouse, WarehouseError,
};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Exit {
    Success = 0,
    /// Bad arguments, unknown names, missing inputs the user pointed at.
    UserError = 1,
    /// The data itself is broken or fails validation.
    DataError = 2,
    Internal = 3,
}

impl Exit {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CommandResult {
    pub command: String,
    pub exit: Exit,
    pub exit_code: u8,
    pub summary: String,
    pub report: Value,
}

impl CommandResult {
    fn ok(command: &str, summary: impl Into<String>, report: Value) -> Self {
        CommandResult {
            command: command.to_string(),
            exit: Exit::Success,
            exit_code: 0,
            summary: summary.into(),
            report,
        }
    }

    fn failed(command: &str, e: CliError) -> Self {
        CommandResult {
            command: command.to_string(),
            exit: e.exit,
            exit_code: e.exit.code(),
            summary: e.message,
            report: e.report,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.exit_code)
    }
}

#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
    pub report: Value,
}

impl CliError {
    fn user(message: impl Into<String>) -> Self {
        CliError {
            exit: Exit::UserError,
            message: message.into(),
            report: Value::Null,
        }
    }

    fn data(message: impl Into<String>) -> Self {
        CliError {
            exit: Exit::DataError,
            message: message.into(),
            report: Value::Null,
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        CliError {
            exit: Exit::Internal,
            message: message.into(),
            report: Value::Null,
        }
    }

    fn with_report(mut self, report: Value) -> Self {
        self.report = report;
        self
    }
}

fn io_exit(e: &std::io::Error) -> Exit {
    match e.kind() {
        std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => Exit::UserError,
        _ => Exit::Internal,
    }
}

impl From<WarehouseError> for CliError {
    fn from(e: WarehouseError) -> Self {
        let exit = match &e {
            WarehouseError::UnknownCode(_)
            | WarehouseError::UnknownLayer(_)
            | WarehouseError::DuplicateLayer(_)
            | WarehouseError::InvalidLayerSpec(..)
            | WarehouseError::RasterLayer(_) => Exit::UserError,
            WarehouseError::Geo(g) => geo_exit(g),
            WarehouseError::Io(io) => io_exit(io),
            _ => Exit::DataError,
        };
        CliError {
            exit,
            message: e.to_string(),
            report: Value::Null,
        }
    }
}

fn geo_exit(e: &GeoError) -> Exit {
    match e {
        GeoError::Parse { .. }
        | GeoError::InvalidProjection(_)
        | GeoError::InvalidEllipsoid(_)
        | GeoError::TooFewControlPoints(_)
        | GeoError::CollinearControlPoints
        | GeoError::Singular => Exit::UserError,
        _ => Exit::DataError,
    }
}

impl From<GeoError> for CliError {
    fn from(e: GeoError) -> Self {
        CliError {
            exit: geo_exit(&e),
            message: e.to_string(),
            report: Value::Null,
        }
    }
}

impl From<CacheError> for CliError {
    fn from(e: CacheError) -> Self {
        let exit = match &e {
            CacheError::UnknownLayer(_) | CacheError::InvalidSpec(_) | CacheError::InvalidQuery(_) => Exit::UserError,
            CacheError::Io(io) => io_exit(io),
            _ => Exit::DataError,
        };
        CliError {
            exit,
            message: e.to_string(),
            report: Value::Null,
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        let exit = match e.kind {
            ErrorKind::BadRequest | ErrorKind::NotFound => Exit::UserError,
            ErrorKind::Internal => Exit::Internal,
        };
        CliError {
            exit,
            message: e.to_string(),
            report: serde_json::to_value(&e).unwrap_or(Value::Null),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "atlas", version, about = "Build, publish and serve the Pacific Islands web atlas")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Directory holding warehouses and caches at their catalog paths.
    #[arg(long, global = true, default_value = ".")]
    pub data_dir: PathBuf,
    /// Catalog JSON; defaults to <data-dir>/catalog.json, else the built-in catalog.
    #[arg(long, global = true)]
    pub catalog: Option<PathBuf>,
    /// Also write the result as JSON to this path.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic source corpus; with --build also warehouses and caches.
    MakeFixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        build: bool,
    },
    /// Create an empty warehouse from a JSON list of layer specs.
    CreateWarehouse {
        #[arg(long)]
        warehouse: String,
        #[arg(long)]
        layers: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Load a GeoJSON source file into a warehouse layer.
    Ingest {
        #[arg(long)]
        warehouse: String,
        #[arg(long)]
        layer: String,
        /// `geographic[:ell=<name>]` or a projection spec such as `utm:60s`.
        #[arg(long, default_value = "geographic")]
        crs: String,
        /// Datum shift to WGS84, `shift:dx,dy,dz[,rx,ry,rz,ppm]`.
        #[arg(long)]
        shift: Option<String>,
        /// Local grid to projection, `affine:a,b,c,d,e,f`.
        #[arg(long)]
        affine: Option<String>,
        /// Fit the affine from a control-point file instead.
        #[arg(long, conflicts_with = "affine")]
        gcp: Option<PathBuf>,
        file: PathBuf,
    },
    /// Close rings, snap vertices, drop duplicates, fix orientation.
    Clean {
        #[arg(long)]
        warehouse: String,
        /// One layer; every vector layer when omitted.
        #[arg(long)]
        layer: Option<String>,
        #[arg(long, default_value_t = tolerances::DEFAULT_SNAP_TOL_DEG)]
        snap_tol: f64,
        /// Layers whose vertices win snaps across layers.
        #[arg(long, value_delimiter = ',')]
        reference_layers: Vec<String>,
    },
    /// Join features split at sheet edges.
    Merge {
        #[arg(long)]
        warehouse: String,
        #[arg(long)]
        layer: Option<String>,
        #[arg(long, default_value_t = tolerances::DEFAULT_SEAM_TOL_DEG)]
        seam_tol: f64,
    },
    /// Check a warehouse; exit 2 when any check fails.
    Validate {
        #[arg(long)]
        warehouse: String,
    },
    /// Write a layer as GeoJSON.
    Export {
        #[arg(long)]
        warehouse: String,
        #[arg(long)]
        layer: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit an affine transform to control-point pairs.
    GcpFit {
        #[arg(long)]
        pairs: PathBuf,
    },
    /// Project a warehouse into its spatially indexed cache.
    BuildCache {
        #[arg(long)]
        warehouse: String,
        /// Base scale denominator; the catalog value by default.
        #[arg(long)]
        scale: Option<u32>,
        /// Layers to publish; every vector layer by default.
        #[arg(long, value_delimiter = ',')]
        layers: Vec<String>,
        /// Output path; the catalog cache path by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-layer counts, index depth, size and build time of a cache.
    CacheStats {
        #[arg(long)]
        warehouse: String,
    },
    /// Serve the HTTP API and UI until SIGTERM or ctrl-c.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: ServeOverrides,
    },
    /// Write a self-contained bundle that serves without network access.
    ExportOffline {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
        #[arg(long)]
        include_warehouses: bool,
        #[arg(long, value_delimiter = ',')]
        codes: Vec<String>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct ServeOverrides {
    #[arg(long)]
    pub listen: Option<String>,
    #[arg(long)]
    pub reference_pixel_m: Option<f64>,
    #[arg(long)]
    pub simplify_per_scale_m: Option<f64>,
    #[arg(long)]
    pub link_bandwidth_bps: Option<f64>,
}

impl ServeOverrides {
    fn apply(&self, c: &mut AtlasConfig) -> Result<(), CliError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(CliError::user(format!("--{name} must be positive, got {v}")))
            }
        };
        if let Some(l) = &self.listen {
            c.listen = l.clone();
        }
        if let Some(v) = self.reference_pixel_m {
            c.settings.reference_pixel_m = positive("reference-pixel-m", v)?;
        }
        if let Some(v) = self.simplify_per_scale_m {
            c.settings.simplify_per_scale_m = positive("simplify-per-scale-m", v)?;
        }
        if let Some(v) = self.link_bandwidth_bps {
            c.settings.link_bandwidth_bps = positive("link-bandwidth-bps", v)?;
        }
        Ok(())
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::MakeFixtures { .. } => "make-fixtures",
            Command::CreateWarehouse { .. } => "create-warehouse",
            Command::Ingest { .. } => "ingest",
            Command::Clean { .. } => "clean",
            Command::Merge { .. } => "merge",
            Command::Validate { .. } => "validate",
            Command::Export { .. } => "export",
            Command::GcpFit { .. } => "gcp-fit",
            Command::BuildCache { .. } => "build-cache",
            Command::CacheStats { .. } => "cache-stats",
            Command::Serve { .. } => "serve",
            Command::ExportOffline { .. } => "export-offline",
        }
    }
}

struct Ctx {
    global: Global,
}

impl Ctx {
    fn catalog(&self) -> Result<AtlasCatalog, CliError> {
        let path = match &self.global.catalog {
            Some(p) => p.clone(),
            None => {
                let p = self.global.data_dir.join("catalog.json");
                if !p.exists() {
                    return Ok(AtlasCatalog::builtin());
                }
                p
            }
        };
        AtlasCatalog::load(&path).map_err(|e| CliError::user(format!("{}: {e}", path.display())))
    }

    fn warehouse_path(&self, code: &str) -> Result<PathBuf, CliError> {
        let c = self.catalog()?;
        let e = c.entry(code).ok_or_else(|| CliError::user(format!("unknown warehouse code '{code}'")))?;
        Ok(self.global.data_dir.join(&e.warehouse_path))
    }

    fn load(&self, code: &str) -> Result<(Warehouse, PathBuf), CliError> {
        let path = self.warehouse_path(code)?;
        if !path.exists() {
            return Err(CliError::user(format!(
                "warehouse {} does not exist; run create-warehouse first",
                path.display()
            )));
        }
        Ok((Warehouse::load(&path)?, path))
    }
}

fn vector_layers(w: &Warehouse, only: &Option<String>) -> Result<Vec<String>, CliError> {
    match only {
        Some(l) => {
            w.layer(l)?;
            Ok(vec![l.clone()])
        }
        None => Ok(w
            .layer_specs()
            .into_iter()
            .filter(|s| s.geometry_kind != GeometryKind::Image)
            .map(|s| s.name)
            .collect()),
    }
}

fn parse_spec<T: std::str::FromStr<Err = GeoError>>(flag: &str, s: &str, hint: &str) -> Result<T, CliError> {
    s.parse().map_err(|e: GeoError| CliError::user(format!("--{flag}: {e}\n  expected {hint}")))
}

fn read_pairs(path: &Path) -> Result<Vec<ControlPointPair>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::user(format!(
            "{}: {e}\n  expected a JSON list of {{\"source\": [x, y], \"target\": [x, y]}}",
            path.display()
        ))
    })
}

fn reports_json(reports: &[(String, CleanReport)]) -> Value {
    Value::Object(
        reports
            .iter()
            .map(|(l, r)| (l.clone(), serde_json::to_value(r).unwrap_or(Value::Null)))
            .collect(),
    )
}

fn layer_summaries(verb: &str, code: &str, reports: &[(String, CleanReport)]) -> String {
    let mut s = format!("{verb} {code}:");
    for (l, r) in reports {
        s.push_str(&format!("\n  {l}: {}", r.summary()));
    }
    s
}

fn run_command(ctx: &Ctx, cmd: &Command) -> Result<CommandResult, CliError> {
    let name = cmd.name();
    match cmd {
        Command::MakeFixtures { out, seed, build } => {
            let c = ctx.catalog()?;
            let manifest = write_fixtures(out, &c, *seed).map_err(|e| CliError::internal(format!("{}: {e}", out.display())))?;
            let mut report = json!({"manifest": manifest});
            let mut summary = format!(
                "wrote fixtures for {} warehouses (seed {seed}) under {}",
                manifest.warehouses.len(),
                out.display()
            );
            if *build {
                let builds = build_data_dir(out, &c, *seed).map_err(|e| CliError::data(e.to_string()))?;
                let features: u64 = builds.iter().map(|b| b.feature_count()).sum();
                summary.push_str(&format!("; built {} caches with {features} features", builds.len()));
                report["builds"] = json!(builds);
            }
            Ok(CommandResult::ok(name, summary, report))
        }
        Command::CreateWarehouse { warehouse, layers, force } => {
            let path = ctx.warehouse_path(warehouse)?;
            if path.exists() && !force {
                return Err(CliError::user(format!("{} exists; pass --force to replace it", path.display())));
            }
            let text = std::fs::read_to_string(layers).map_err(|e| CliError::user(format!("{}: {e}", layers.display())))?;
            let specs: Vec<LayerSpec> =
                serde_json::from_str(&text).map_err(|e| CliError::user(format!("{}: {e}", layers.display())))?;
            let w = create_warehouse(warehouse, specs)?;
            if let Some(p) = path.parent() {
                std::fs::create_dir_all(p).map_err(|e| CliError::internal(format!("{}: {e}", p.display())))?;
            }
            w.save(&path)?;
            let names: Vec<String> = w.layer_specs().into_iter().map(|s| s.name).collect();
            Ok(CommandResult::ok(
                name,
                format!("created {} with layers {}", path.display(), names.join(", ")),
                json!({"path": path, "layers": names}),
            ))
        }
        Command::Ingest {
            warehouse,
            layer,
            crs,
            shift,
            affine,
            gcp,
            file,
        } => {
            let crs: SourceCrs = parse_spec("crs", crs, "'geographic', 'geographic:ell=<name>', 'utm:<zone><n|s>' or 'tm:cm=..,k=..,fe=..,fn=..'")?;
            let shift: Option<DatumShift> = shift
                .as_deref()
                .map(|s| parse_spec("shift", s, "'shift:dx,dy,dz' or 'shift:dx,dy,dz,rx,ry,rz,ppm'"))
                .transpose()?;
            let mut affine: Option<AffineTransform> = affine
                .as_deref()
                .map(|s| parse_spec("affine", s, "'affine:a,b,c,d,e,f'"))
                .transpose()?;
            let mut fit = None;
            if let Some(g) = gcp {
                let f = fit_affine(&read_pairs(g)?)?;
                affine = Some(f.transform);
                fit = Some(f);
            }
            let (mut w, path) = ctx.load(warehouse)?;
            if !file.exists() {
                return Err(CliError::user(format!("{}: no such file", file.display())));
            }
            let report = w.ingest_file(layer, file, &IngestOptions { crs, shift, affine })?;
            w.save(&path)?;
            let mut summary = format!("ingested {} into {warehouse}/{layer}: {}", file.display(), report.summary());
            if let Some(f) = &fit {
                summary.push_str(&format!("\n  control-point fit {} (rms {:.4} m)", f.transform, f.rms));
            }
            Ok(CommandResult::ok(
                name,
                summary,
                json!({"layer": layer, "report": report, "affine": affine.map(|a| a.to_string()), "fit_rms_m": fit.map(|f| f.rms)}),
            ))
        }
        Command::Clean {
            warehouse,
            layer,
            snap_tol,
            reference_layers,
        } => {
            if !(snap_tol.is_finite() && *snap_tol >= 0.0) {
                return Err(CliError::user(format!("--snap-tol must be a non-negative number, got {snap_tol}")));
            }
            let (mut w, path) = ctx.load(warehouse)?;
            let opts = CleanOptions {
                snap_tol: *snap_tol,
                reference_layers: reference_layers.clone(),
            };
            let mut reports = Vec::new();
            for l in vector_layers(&w, layer)? {
                let r = w.clean_topology_with(&l, &opts)?;
                reports.push((l, r));
            }
            let changes: usize = reports.iter().map(|(_, r)| r.changes()).sum();
            if changes > 0 {
                w.save(&path)?;
            }
            Ok(CommandResult::ok(
                name,
                layer_summaries("cleaned", warehouse, &reports) + &format!("\n  total changes {changes}"),
                json!({"changes": changes, "layers": reports_json(&reports)}),
            ))
        }
        Command::Merge {
            warehouse,
            layer,
            seam_tol,
        } => {
            if !(seam_tol.is_finite() && *seam_tol >= 0.0) {
                return Err(CliError::user(format!("--seam-tol must be a non-negative number, got {seam_tol}")));
            }
            let (mut w, path) = ctx.load(warehouse)?;
            let mut reports = Vec::new();
            for l in vector_layers(&w, layer)? {
                let r = w.merge_sheets(&l, *seam_tol)?;
                reports.push((l, r));
            }
            let merged: usize = reports.iter().map(|(_, r)| r.features_merged).sum();
            if reports.iter().any(|(_, r)| r.changes() > 0) {
                w.save(&path)?;
            }
            Ok(CommandResult::ok(
                name,
                layer_summaries("merged", warehouse, &reports) + &format!("\n  features merged {merged}"),
                json!({"merged": merged, "layers": reports_json(&reports)}),
            ))
        }
        Command::Validate { warehouse } => {
            let (w, _) = ctx.load(warehouse)?;
            let v = w.validate();
            let mut summary = format!("validate {warehouse}:");
            for c in &v.checks {
                summary.push_str(&format!("\n  {:<28} {}", c.name, if c.passed { "ok" } else { "FAILED" }));
                for f in c.failures.iter().take(10) {
                    let id = f.id.map(|i| format!(" #{i}")).unwrap_or_default();
                    summary.push_str(&format!("\n    {}{id}: {}", f.layer, f.detail));
                }
                if c.failures.len() > 10 {
                    summary.push_str(&format!("\n    ... {} more", c.failures.len() - 10));
                }
            }
            let report = serde_json::to_value(&v).unwrap_or(Value::Null);
            if v.is_ok() {
                Ok(CommandResult::ok(name, summary, report))
            } else {
                Err(CliError::data(summary).with_report(report))
            }
        }
        Command::Export { warehouse, layer, out } => {
            let (w, _) = ctx.load(warehouse)?;
            let n = w.export_layer(layer, out)?;
            Ok(CommandResult::ok(
                name,
                format!("wrote {n} features of {warehouse}/{layer} to {}", out.display()),
                json!({"features": n, "path": out}),
            ))
        }
        Command::GcpFit { pairs } => {
            let p = read_pairs(pairs)?;
            let fit = fit_affine(&p)?;
            let mut summary = format!("{}\nrms {:.6} m over {} pairs", fit.transform, fit.rms, p.len());
            for (i, r) in fit.residuals.iter().enumerate() {
                summary.push_str(&format!("\n  pair {}: {r:.6} m", i + 1));
            }
            Ok(CommandResult::ok(
                name,
                summary,
                json!({"affine": fit.transform.to_string(), "coefficients": fit.transform.coefficients(), "residuals_m": fit.residuals, "rms_m": fit.rms}),
            ))
        }
        Command::BuildCache {
            warehouse,
            scale,
            layers,
            out,
        } => {
            let c = ctx.catalog()?;
            let e = c.entry(warehouse).ok_or_else(|| CliError::user(format!("unknown warehouse code '{warehouse}'")))?;
            let (w, _) = ctx.load(warehouse)?;
            let base = scale.unwrap_or(e.base_scale_denom);
            let mut spec = CacheSpec::all_vector_layers(&w, e.projection, base);
            if !layers.is_empty() {
                spec.layers = layers
                    .iter()
                    .map(|l| PublishedLayer {
                        name: l.clone(),
                        attributes: None,
                    })
                    .collect();
            }
            let path = out.clone().unwrap_or_else(|| ctx.global.data_dir.join(&e.cache_path));
            if let Some(p) = path.parent() {
                std::fs::create_dir_all(p).map_err(|err| CliError::internal(format!("{}: {err}", p.display())))?;
            }
            let r = build_cache(&w, &spec, &path)?;
            let mut summary = format!(
                "built {} ({}, base scale 1:{base}): {} features in {} layers, {} bytes",
                path.display(),
                e.projection,
                r.feature_count(),
                r.layers.len(),
                r.bytes
            );
            if r.dropped_out_of_zone() > 0 {
                summary.push_str(&format!(", {} dropped outside the projection zone", r.dropped_out_of_zone()));
            }
            if r.identical_to_previous {
                summary.push_str("; byte-identical to the previous build");
            }
            Ok(CommandResult::ok(name, summary, json!({"projection": e.projection.to_string(), "base_scale_denom": base, "build": r})))
        }
        Command::CacheStats { warehouse } => {
            let c = ctx.catalog()?;
            let e = c.entry(warehouse).ok_or_else(|| CliError::user(format!("unknown warehouse code '{warehouse}'")))?;
            let path = ctx.global.data_dir.join(&e.cache_path);
            if !path.exists() {
                return Err(CliError::user(format!("{}: no cache; run build-cache first", path.display())));
            }
            let s = open_cache(&path)?.stats();
            let mut summary = format!(
                "{}: {} bytes, index depth {}, built at {}, base scale 1:{}",
                path.display(),
                s.file_size,
                s.index_depth,
                s.build_unix,
                s.base_scale_denom
            );
            for l in &s.layers {
                summary.push_str(&format!("\n  {:<12} {:>8} features, depth {}", l.name, l.features, l.index_depth));
            }
            Ok(CommandResult::ok(name, summary, json!(s)))
        }
        Command::Serve { config, overrides } => {
            let mut cfg = AtlasConfig::load(config)?;
            overrides.apply(&mut cfg)?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::internal(e.to_string()))?;
            rt.block_on(atlas_server::run(cfg, |addr| {
                use std::io::Write;
                let mut out = std::io::stdout();
                let _ = writeln!(out, "listening on http://{addr}");
                let _ = out.flush();
            }))
            .map_err(|e| match e {
                atlas_server::RunError::Service(s) => CliError::from(s),
                atlas_server::RunError::Bind(..) => CliError::user(e.to_string()),
                atlas_server::RunError::Io(_) => CliError::internal(e.to_string()),
            })?;
            Ok(CommandResult::ok(name, "server stopped", Value::Null))
        }
        Command::ExportOffline {
            config,
            out,
            force,
            include_warehouses,
            codes,
        } => {
            let cfg = match config {
                Some(p) => AtlasConfig::load(p)?,
                None => {
                    let mut c = AtlasConfig::for_data_dir(&ctx.global.data_dir);
                    c.catalog = ctx.global.catalog.clone();
                    c
                }
            };
            let atlas = Atlas::open(cfg)?;
            let opts = BundleOptions {
                codes: (!codes.is_empty()).then(|| codes.clone()),
                include_warehouses: *include_warehouses,
                force: *force,
            };
            let m = atlas.export_offline_bundle(out, &opts)?;
            let bytes: u64 = m.files.iter().map(|f| f.bytes).sum();
            Ok(CommandResult::ok(
                name,
                format!(
                    "wrote bundle {} with {} warehouses, {} files, {bytes} bytes; serve it with `atlas serve --config {}`",
                    out.display(),
                    m.codes.len(),
                    m.files.len() + 1,
                    out.join("atlas.toml").display()
                ),
                json!(m),
            ))
        }
    }
}

/// Runs a parsed command line and writes the report file if requested.
pub fn run(cli: &Cli) -> CommandResult {
    let ctx = Ctx { global: cli.global.clone() };
    let name = cli.command.name();
    let mut result = match run_command(&ctx, &cli.command) {
        Ok(r) => r,
        Err(e) => CommandResult::failed(name, e),
    };
    if let Some(path) = &cli.global.report {
        let text = serde_json::to_string_pretty(&result).unwrap_or_default() + "\n";
        if let Err(e) = std::fs::write(path, text) {
            result = CommandResult::failed(name, CliError::internal(format!("cannot write report {}: {e}", path.display())));
        }
    }
    result
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_args<I, T>(args: I) -> CommandResult
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => CommandResult {
            command: String::new(),
            exit: Exit::UserError,
            exit_code: Exit::UserError.code(),
            summary: e.to_string(),
            report: Value::Null,
        },
    }
}
