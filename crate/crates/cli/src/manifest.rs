//! Run manifests and atomic artifact writing.
//!
//! Every subcommand writes its outputs through [`ArtifactWriter`]: contents
//! land in a temporary file that is renamed into place, so failures leave no
//! partial artifacts, and a `manifest.json` echoing the fully resolved
//! configuration is written last. Re-running with `--config manifest.json`
//! reproduces the outputs bit for bit (timestamps aside).

use crate::{CliError, CliResult};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<String>,
}

pub struct ArtifactWriter {
    dir: PathBuf,
    subcommand: String,
    seed: u64,
    started_at: chrono::DateTime<chrono::Utc>,
    outputs: Vec<String>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path, subcommand: &str, seed: u64) -> CliResult<Self> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Failed(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            subcommand: subcommand.to_string(),
            seed,
            started_at: chrono::Utc::now(),
            outputs: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes one artifact atomically (temp file + rename).
    pub fn write(&mut self, name: &str, contents: &[u8]) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        atomic_write(&path, contents)?;
        self.outputs.push(path.display().to_string());
        Ok(path)
    }

    /// Records a file produced by other means (e.g. a checkpoint).
    pub fn record(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Writes `manifest.json` last and returns its path.
    pub fn finish(self, config: serde_json::Value) -> CliResult<PathBuf> {
        let manifest = RunManifest {
            subcommand: self.subcommand,
            config,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: self.started_at.to_rfc3339(),
            finished_at: chrono::Utc::now().to_rfc3339(),
            outputs: self.outputs,
        };
        let json = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| CliError::Failed(format!("manifest serialization: {e}")))?;
        let path = self.dir.join("manifest.json");
        atomic_write(&path, &json)?;
        Ok(path)
    }
}

pub fn atomic_write(path: &Path, contents: &[u8]) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)
        .and_then(|_| std::fs::rename(&tmp, path))
        .map_err(|e| CliError::Failed(format!("cannot write {}: {e}", path.display())))
}

/// If `value` is a manifest (has `subcommand` and `config` fields), returns
/// the embedded config; otherwise returns the value unchanged.
pub fn unwrap_manifest(value: serde_json::Value) -> serde_json::Value {
    match value {
        serde_json::Value::Object(ref map)
            if map.contains_key("subcommand") && map.contains_key("config") =>
        {
            map["config"].clone()
        }
        other => other,
    }
}
