//! `manifest.json`: provenance of one run directory.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Thresholds};
use crate::run::RunError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub version: String,
    pub kind: String,
    pub seed: u64,
    pub n_paths: usize,
    /// Initial wealth; thresholds in the CSVs are absolute.
    pub wealth: f64,
    pub status: RunStatus,
    pub wall_seconds: f64,
    pub files: Vec<String>,
    pub thresholds: Thresholds,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub details: serde_json::Map<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig, config_text: &str) -> Self {
        Self {
            config_sha256: sha256_hex(config_text.as_bytes()),
            version: env!("CARGO_PKG_VERSION").to_string(),
            kind: cfg.kind.name().to_string(),
            seed: cfg.seed,
            n_paths: cfg.n_paths,
            wealth: cfg.wealth,
            status: RunStatus::Running,
            wall_seconds: 0.0,
            files: Vec::new(),
            thresholds: cfg.thresholds.clone(),
            warnings: Vec::new(),
            details: serde_json::Map::new(),
            error: None,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), RunError> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialises");
        text.push('\n');
        fs::write(&path, text).map_err(|source| RunError::Io { path, source })
    }

    pub fn read(dir: &Path) -> Result<Self, String> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_abc() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
