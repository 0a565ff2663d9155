//! Run manifests: a JSON record of what a command ran and what it wrote,
//! written atomically as the final step so an interrupted run never leaves a
//! partial manifest behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::{ExperimentConfig, Ini};

/// Summary of one completed run. Artifact paths are relative to the output
/// directory, so a run directory can be archived or moved wholesale.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// Unix seconds. Honors `SOURCE_DATE_EPOCH` when set and is 0 otherwise,
    /// keeping every output byte a pure function of config, flags, and
    /// input files.
    pub timestamp: u64,
    pub seed: u64,
    pub config: Ini,
    pub artifacts: BTreeMap<String, String>,
    pub status: String,
}

fn timestamp() -> u64 {
    match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(raw) => raw.parse().unwrap_or(0),
        Err(_) => 0,
    }
}

impl RunManifest {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        RunManifest {
            tool: "featnorm",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            timestamp: timestamp(),
            seed: cfg.seed,
            config: cfg.echo().clone(),
            artifacts: BTreeMap::new(),
            status: "complete".to_string(),
        }
    }

    /// Registers an artifact under its path relative to the output directory.
    pub fn add(&mut self, name: &str, relative_path: &str) {
        self.artifacts.insert(name.to_string(), relative_path.to_string());
    }

    /// Serializes to `manifest.json` via a temp file and rename, so the
    /// manifest exists either completely or not at all.
    pub fn write(&self, out_dir: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self).context("serializing manifest")? + "\n";
        let tmp = out_dir.join("manifest.json.tmp");
        let target = out_dir.join("manifest.json");
        fs::write(&tmp, body).with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, &target).with_context(|| format!("renaming manifest into {}", target.display()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config;

    #[test]
    fn manifest_round_trips_through_json_with_relative_paths() {
        let cfg = config::load(None, &[], None).unwrap();
        let mut manifest = RunManifest::new("train", &cfg);
        manifest.add("report", "report.json");
        let dir = tempfile::tempdir().unwrap();
        manifest.write(dir.path()).unwrap();

        let raw = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&raw).unwrap();
        assert_eq!(parsed["command"], "train");
        assert_eq!(parsed["artifacts"]["report"], "report.json");
        assert_eq!(parsed["status"], "complete");
        assert_eq!(parsed["seed"], 42);
        assert!(!dir.path().join("manifest.json.tmp").exists());
    }

    #[test]
    fn rewriting_a_manifest_is_byte_stable() {
        let cfg = config::load(None, &[], None).unwrap();
        let manifest = RunManifest::new("eval", &cfg);
        let dir = tempfile::tempdir().unwrap();
        manifest.write(dir.path()).unwrap();
        let first = fs::read(dir.path().join("manifest.json")).unwrap();
        manifest.write(dir.path()).unwrap();
        let second = fs::read(dir.path().join("manifest.json")).unwrap();
        assert_eq!(first, second);
    }
}
