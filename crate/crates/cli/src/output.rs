//! Artifact writing: CSV tables with a provenance line and a metadata JSON.

use std::fs;
use std::path::Path;
use std::process::Command;

use serde::Serialize;
use serde_json::{Map, Value};

use warmstart::table::{Provenance, Table};

use crate::config::Config;
use crate::CliError;

/// What a subcommand produced.
#[derive(Debug, Default)]
pub struct Report {
    /// `(suffix, table)`; the empty suffix is the main `<name>.csv`.
    pub tables: Vec<(String, Table)>,
    /// `(suffix, value)` written as `<name><suffix>.json`.
    pub json: Vec<(String, Value)>,
    pub summary: Map<String, Value>,
    /// Printed to stdout after the artifacts are written.
    pub text: Option<String>,
    /// Set when the run completed but a check inside it failed.
    pub failure: Option<String>,
}

impl Report {
    pub fn table(&mut self, suffix: &str, t: Table) {
        self.tables.push((suffix.to_string(), t));
    }

    pub fn note(&mut self, key: &str, v: impl Into<Value>) {
        self.summary.insert(key.to_string(), v.into());
    }
}

#[derive(Serialize)]
pub struct Meta<'a> {
    pub subcommand: &'a str,
    pub seed: u64,
    pub config_path: Option<&'a Path>,
    pub config: &'a Config,
    pub long_run: bool,
    pub threads: Option<usize>,
    pub duration_s: f64,
}

/// Revision of the source tree this binary was built from.
fn git_revision() -> String {
    Command::new("git")
        .args([
            "-C",
            env!("CARGO_MANIFEST_DIR"),
            "rev-parse",
            "--short",
            "HEAD",
        ])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_string())
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Validation(format!("cannot write {}: {e}", path.display()))
}

/// Renders every table first so a non-finite value aborts before any file is touched.
pub fn write(outdir: &Path, name: &str, report: &Report, meta: &Meta) -> Result<(), CliError> {
    let git = git_revision();
    let provenance = Provenance {
        seed: meta.seed,
        git: git.clone(),
        config: meta
            .config_path
            .map_or_else(|| "defaults".to_string(), |p| p.display().to_string()),
    };
    let mut files: Vec<(String, String)> = Vec::new();
    for (suffix, t) in &report.tables {
        files.push((
            format!("{name}{suffix}.csv"),
            t.to_csv_string(Some(&provenance))?,
        ));
    }
    for (suffix, v) in &report.json {
        files.push((format!("{name}{suffix}.json"), json_text(v)?));
    }
    fs::create_dir_all(outdir).map_err(|e| io_err(outdir, e))?;
    let mut outputs = Vec::new();
    for (file, body) in &files {
        let path = outdir.join(file);
        fs::write(&path, body).map_err(|e| io_err(&path, e))?;
        outputs.push(file.clone());
    }
    let mut m = serde_json::to_value(meta).map_err(|e| CliError::Validation(e.to_string()))?;
    prune_nulls(&mut m);
    let obj = m.as_object_mut().expect("struct serializes to an object");
    obj.insert("git".into(), git.into());
    obj.insert("outputs".into(), outputs.into());
    obj.insert("summary".into(), Value::Object(report.summary.clone()));
    let path = outdir.join(format!("{name}.meta.json"));
    fs::write(&path, json_text(&m)?).map_err(|e| io_err(&path, e))?;
    Ok(())
}

/// Drops unset config fields from the echo.
fn prune_nulls(v: &mut Value) {
    if let Value::Object(map) = v {
        map.retain(|_, x| !x.is_null());
        map.values_mut().for_each(prune_nulls);
        map.retain(|_, x| !matches!(x, Value::Object(o) if o.is_empty()));
    }
}

fn json_text(v: &Value) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Validation(e.to_string()))?;
    s.push('\n');
    Ok(s)
}
