use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use xychain::scenarios::ScenarioOutput;

use crate::config::Resolved;

#[derive(Debug)]
pub struct WriteError {
    path: PathBuf,
    detail: String,
}

impl fmt::Display for WriteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot write {}: {}", self.path.display(), self.detail)
    }
}

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    scenario: &'a str,
    seed: u64,
    config_file: Option<String>,
    /// Rerun with `run <scenario> --config resolved_config.toml`.
    resolved_config: &'a str,
    files: &'a [String],
}

#[derive(Serialize)]
struct Summary<'a> {
    scenario: &'a str,
    seed: u64,
    #[serde(flatten)]
    body: &'a serde_json::Value,
}

/// Writes through a temporary name so that a reader never sees a
/// half-written file.
fn put(dir: &Path, name: &str, contents: &[u8]) -> Result<(), WriteError> {
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.partial"));
    let err = |e: std::io::Error| WriteError { path: path.clone(), detail: e.to_string() };
    fs::write(&tmp, contents).map_err(err)?;
    fs::rename(&tmp, &path).map_err(err)
}

/// Writes one CSV per table, `summary.json`, `resolved_config.toml` and
/// `provenance.json`. Returns the file names.
pub fn write_all(dir: &Path, output: &ScenarioOutput, resolved: &Resolved) -> Result<Vec<String>, WriteError> {
    let config = &resolved.config;
    let resolved_toml = toml::to_string(config).map_err(|e| WriteError {
        path: dir.join("resolved_config.toml"),
        detail: e.to_string(),
    })?;
    let summary = Summary { scenario: output.kind.name(), seed: config.seed, body: &output.summary };
    let summary_json = serde_json::to_string_pretty(&summary).expect("summary serializes");

    let mut files: Vec<String> = output.tables.iter().map(|(name, _)| format!("{name}.csv")).collect();
    files.extend(["summary.json", "resolved_config.toml", "provenance.json"].map(String::from));
    let provenance = Provenance {
        tool: "xychain",
        version: env!("CARGO_PKG_VERSION"),
        scenario: output.kind.name(),
        seed: config.seed,
        config_file: resolved.source.as_ref().map(|p| p.display().to_string()),
        resolved_config: &resolved_toml,
        files: &files,
    };
    let provenance_json = serde_json::to_string_pretty(&provenance).expect("provenance serializes");

    fs::create_dir_all(dir).map_err(|e| WriteError { path: dir.to_path_buf(), detail: e.to_string() })?;
    for (name, table) in &output.tables {
        put(dir, &format!("{name}.csv"), table.to_csv_string().as_bytes())?;
    }
    put(dir, "summary.json", (summary_json + "\n").as_bytes())?;
    put(dir, "resolved_config.toml", resolved_toml.as_bytes())?;
    put(dir, "provenance.json", (provenance_json + "\n").as_bytes())?;
    Ok(files)
}
