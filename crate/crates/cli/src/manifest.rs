//! `manifest.json`: per stage, the config fingerprint and a hash of every
//! file the stage wrote. Holds no timestamps, so reruns reproduce it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub config_fingerprint: String,
    /// Path relative to the run directory -> hex SHA-256.
    pub files: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub stages: BTreeMap<String, StageEntry>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            stages: BTreeMap::new(),
        }
    }
}

impl Manifest {
    pub fn load(out: &Path) -> Result<Self> {
        let path = out.join(MANIFEST_FILE);
        match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).with_context(|| format!("reading {}", path.display())),
            Err(_) => Ok(Self::default()),
        }
    }

    pub fn save(&self, out: &Path) -> Result<()> {
        let path = out.join(MANIFEST_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(self)?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn record_stage(&mut self, out: &Path, stage: &str, fingerprint: &str, files: &[PathBuf]) -> Result<()> {
        let mut entry = StageEntry {
            config_fingerprint: fingerprint.to_string(),
            files: BTreeMap::new(),
        };
        for f in files {
            let bytes = std::fs::read(f).with_context(|| format!("hashing {}", f.display()))?;
            let rel = f.strip_prefix(out).unwrap_or(f);
            entry
                .files
                .insert(rel.to_string_lossy().replace('\\', "/"), hex::encode(Sha256::digest(&bytes)));
        }
        self.stages.insert(stage.to_string(), entry);
        Ok(())
    }
}
