//! Run manifests: resolved config, seed, versions, timestamps and output
//! digests for every artifact a subcommand writes.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    /// Path relative to the output directory.
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub started: String,
    pub finished: String,
    pub wall_time_s: f64,
    pub threads: usize,
    pub outputs: Vec<OutputDigest>,
}

pub fn sha256_file(path: &Path) -> io::Result<(String, u64)> {
    let bytes = std::fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    let hex = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok((hex, bytes.len() as u64))
}

/// Versions of the crate and of each module's output schema.
pub fn versions() -> BTreeMap<String, String> {
    let v = env!("CARGO_PKG_VERSION").to_string();
    ["pps-sse", "stats", "toy", "gaussian", "trajectory", "rg", "fss", "cli"]
        .into_iter()
        .map(|m| (m.to_string(), v.clone()))
        .collect()
}

impl RunManifest {
    pub fn digest_outputs(dir: &Path, files: &[String]) -> io::Result<Vec<OutputDigest>> {
        files
            .iter()
            .map(|f| {
                let (sha256, bytes) = sha256_file(&dir.join(f))?;
                Ok(OutputDigest { file: f.clone(), sha256, bytes })
            })
            .collect()
    }

    pub fn write(&self, dir: &Path) -> io::Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> io::Result<RunManifest> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text).map_err(io::Error::other)
    }

    /// Files whose current digest differs from the recorded one (or that are missing).
    pub fn stale_outputs(&self, dir: &Path) -> Vec<String> {
        self.outputs
            .iter()
            .filter(|o| !matches!(sha256_file(&dir.join(&o.file)), Ok((h, _)) if h == o.sha256))
            .map(|o| o.file.clone())
            .collect()
    }
}
