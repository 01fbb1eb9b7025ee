//! Run manifests: enough to re-run any command and check its outputs.

use super::config::ExperimentConfig;
use super::io::{read_json, write_json};
use crate::rng::RngStream;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Master seed and stream path the stage drew from.
    pub seed: u64,
    pub stream: Vec<u64>,
    pub stream_digest: String,
    pub wall_clock_secs: f64,
    /// SHA-256 of every file the stage wrote, keyed by path relative to the
    /// output directory.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub software_version: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub config: String,
    pub stages: BTreeMap<String, StageRecord>,
    #[serde(default)]
    pub notes: BTreeMap<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        RunManifest {
            schema: "metasub-manifest v1".into(),
            software_version: env!("CARGO_PKG_VERSION").into(),
            config_hash: cfg.hash(),
            master_seed: cfg.seed,
            config: cfg.to_text(),
            stages: BTreeMap::new(),
            notes: BTreeMap::new(),
        }
    }

    /// The manifest already in `dir` if it belongs to the same config, else
    /// a fresh one.
    pub fn open(dir: &Path, cfg: &ExperimentConfig) -> Self {
        let path = dir.join(MANIFEST);
        match read_json::<RunManifest>(&path) {
            Ok(m) if m.config_hash == cfg.hash() => m,
            _ => Self::new(cfg),
        }
    }

    pub fn record(
        &mut self,
        stage: &str,
        stream: &RngStream,
        secs: f64,
        dir: &Path,
        files: &[String],
    ) -> Result<()> {
        let mut outputs = BTreeMap::new();
        for f in files {
            outputs.insert(f.clone(), file_sha256(&dir.join(f))?);
        }
        self.stages.insert(
            stage.to_string(),
            StageRecord {
                seed: stream.seed(),
                stream: stream.path().to_vec(),
                stream_digest: stream.digest(),
                wall_clock_secs: secs,
                outputs,
            },
        );
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST), self)
    }

    /// Copy with timings zeroed, for byte comparisons between runs.
    pub fn without_timing(&self) -> Self {
        let mut m = self.clone();
        for s in m.stages.values_mut() {
            s.wall_clock_secs = 0.0;
        }
        m
    }
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}
