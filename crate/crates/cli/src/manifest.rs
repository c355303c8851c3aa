use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use indexnet::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const ARTIFACT_VERSION: &str = concat!("indexnet-cli ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Incomplete,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRecord {
    pub path: PathBuf,
    pub sha256: String,
    pub steps: usize,
    pub channels: usize,
}

/// Everything needed to re-run a command and check that it reproduced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub status: RunStatus,
    pub artifact_version: String,
    pub seed: u64,
    /// Seed of every trained variant, in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variant_seeds: Vec<u64>,
    pub workers: usize,
    pub config: TrainConfig,
    pub data: DataRecord,
    pub started_at: String,
    pub wall_clock_s: f64,
    pub metrics: serde_json::Value,
}

impl RunManifest {
    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.json");
        let tmp = dir.join("manifest.json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(self)?)
            .with_context(|| format!("writing {}", tmp.display()))?;
        std::fs::rename(&tmp, &path).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| indexnet::Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
        serde_json::from_str(&text)
            .map_err(|e| indexnet::Error::Dataset(format!("{}: not a run manifest: {e}", path.display())).into())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path).map_err(|e| indexnet::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).with_context(|| format!("reading {}", path.display()))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}
