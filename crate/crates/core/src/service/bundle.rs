//! Offline bundles: a self-contained, relocatable directory that the same
//! server can serve without network access.
//!
//! ```text
//! <out>/atlas.toml        config with paths relative to <out>
//! <out>/catalog.json
//! <out>/caches/XX.pisc    one per exported warehouse
//! <out>/warehouses/...    only with `include_warehouses`
//! <out>/ui/...            UI assets
//! <out>/manifest.json     every other file with size and SHA-256
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Atlas, AtlasConfig, ServiceError, BUILTIN_INDEX_HTML};

pub const BUNDLE_FORMAT: &str = "atlas-bundle-1";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BundleOptions {
    /// Warehouses to include; every loaded cache when `None`.
    pub codes: Option<Vec<String>>,
    pub include_warehouses: bool,
    /// Allow writing into a non-empty directory.
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleFile {
    /// Relative to the bundle root, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format: String,
    pub codes: Vec<String>,
    pub config: String,
    pub catalog: String,
    pub files: Vec<BundleFile>,
}

fn io_err(path: &Path, e: std::io::Error) -> ServiceError {
    ServiceError::internal(format!("{}: {e}", path.display()))
}

struct Writer {
    root: PathBuf,
    files: Vec<BundleFile>,
}

impl Writer {
    fn put(&mut self, rel: &str, bytes: &[u8]) -> Result<(), ServiceError> {
        let path = self.root.join(rel);
        if let Some(p) = path.parent() {
            fs::create_dir_all(p).map_err(|e| io_err(p, e))?;
        }
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.files.push(BundleFile {
            path: rel.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    fn copy_tree(&mut self, src: &Path, rel: &str) -> Result<(), ServiceError> {
        let mut entries: Vec<_> = fs::read_dir(src)
            .map_err(|e| io_err(src, e))?
            .collect::<Result<_, _>>()
            .map_err(|e| io_err(src, e))?;
        entries.sort_by_key(|e| e.file_name());
        for e in entries {
            let name = e.file_name().to_string_lossy().into_owned();
            let child = format!("{rel}/{name}");
            let path = e.path();
            if path.is_dir() {
                self.copy_tree(&path, &child)?;
            } else {
                let bytes = fs::read(&path).map_err(|err| io_err(&path, err))?;
                self.put(&child, &bytes)?;
            }
        }
        Ok(())
    }
}

fn relative(p: &str) -> Result<&str, ServiceError> {
    let path = Path::new(p);
    if path.is_absolute() || path.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
        return Err(ServiceError::bad_request(
            "bundle_path_not_relative",
            format!("catalog path '{p}' must be relative and stay inside the data directory"),
        ));
    }
    Ok(p)
}

pub(super) fn export(atlas: &Atlas, out: &Path, opts: &BundleOptions) -> Result<BundleManifest, ServiceError> {
    if out.exists() {
        let non_empty = fs::read_dir(out).map_err(|e| io_err(out, e))?.next().is_some();
        if non_empty && !opts.force {
            return Err(ServiceError::bad_request(
                "bundle_dir_not_empty",
                format!("{} is not empty; pass force to overwrite", out.display()),
            ));
        }
    }
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;

    let codes = match &opts.codes {
        Some(c) => c.clone(),
        None => atlas.loaded_codes(),
    };
    let mut w = Writer {
        root: out.to_path_buf(),
        files: Vec::new(),
    };
    for code in &codes {
        let entry = atlas.entry(code)?;
        let cache = atlas.cache(code)?;
        w.put(relative(&entry.cache_path)?, &cache.to_bytes())?;
        if opts.include_warehouses {
            let src = atlas.warehouse_path(entry);
            let bytes = fs::read(&src).map_err(|e| {
                ServiceError::not_found("warehouse_missing", format!("{}: {e}", src.display()))
            })?;
            w.put(relative(&entry.warehouse_path)?, &bytes)?;
        }
    }
    w.put("catalog.json", atlas.catalog().to_json_pretty().as_bytes())?;
    match &atlas.config().static_dir {
        Some(dir) => w.copy_tree(dir, "ui")?,
        None => w.put("ui/index.html", BUILTIN_INDEX_HTML.as_bytes())?,
    }
    let config = AtlasConfig {
        catalog: Some(PathBuf::from("catalog.json")),
        data_dir: PathBuf::from("."),
        listen: atlas.config().listen.clone(),
        static_dir: Some(PathBuf::from("ui")),
        settings: *atlas.settings(),
    };
    let toml = toml::to_string(&config).map_err(|e| ServiceError::internal(e.to_string()))?;
    w.put("atlas.toml", toml.as_bytes())?;

    w.files.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = BundleManifest {
        format: BUNDLE_FORMAT.to_string(),
        codes,
        config: "atlas.toml".into(),
        catalog: "catalog.json".into(),
        files: w.files,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| ServiceError::internal(e.to_string()))?;
    let path = out.join("manifest.json");
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
    Ok(manifest)
}
