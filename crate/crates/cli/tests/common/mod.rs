#![allow(dead_code)]

use std::path::Path;

use atlas_cli::{run_args, CommandResult, Exit};
use atlas_core::fixtures::FixtureManifest;

pub fn atlas(args: &[&str]) -> CommandResult {
    run_args(std::iter::once("atlas").chain(args.iter().copied()))
}

#[track_caller]
pub fn ok(args: &[&str]) -> CommandResult {
    let r = atlas(args);
    assert_eq!(r.exit, Exit::Success, "atlas {}: {}", args.join(" "), r.summary);
    r
}

/// Runs the operator pipeline for one warehouse from the fixture sources in
/// `dir`: create, ingest every source, clean, merge, validate, build-cache.
pub fn pipeline(dir: &Path, manifest: &FixtureManifest, code: &str) -> Vec<CommandResult> {
    let d = dir.to_str().unwrap();
    let wf = manifest.warehouses.iter().find(|w| w.code == code).unwrap();
    let mut out = vec![ok(&[
        "--data-dir",
        d,
        "create-warehouse",
        "--warehouse",
        code,
        "--layers",
        dir.join(&wf.layers_file).to_str().unwrap(),
        "--force",
    ])];
    for s in &wf.sources {
        let file = dir.join(&s.path);
        let mut args = vec!["--data-dir", d, "ingest", "--warehouse", code, "--layer", &s.layer, "--crs", &s.crs];
        let gcp = s.gcp_file.as_ref().map(|g| dir.join(g));
        if let Some(g) = &gcp {
            args.extend(["--gcp", g.to_str().unwrap()]);
        }
        args.push(file.to_str().unwrap());
        out.push(ok(&args));
    }
    for cmd in ["clean", "merge", "validate", "build-cache"] {
        out.push(ok(&["--data-dir", d, cmd, "--warehouse", code]));
    }
    out
}
