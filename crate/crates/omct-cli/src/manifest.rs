//! Run provenance: which tool version, config, and seed produced which files.

use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    /// FNV-1a 64 hash (hex) of the config bytes and the effective seed; an
    /// identity for "same inputs", not a cryptographic digest.
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn start(config_bytes: &[u8], seed: u64) -> Self {
        RunManifest {
            config_hash: format!("{:016x}", fnv1a(config_bytes, seed)),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_s: unix_now(),
            finished_unix_s: 0,
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Write the manifest itself (listed among its outputs) into `dir`.
    pub fn finish(mut self, dir: &Path) -> std::io::Result<()> {
        let path = dir.join("run_manifest.json");
        self.record(&path);
        self.finished_unix_s = unix_now();
        std::fs::write(&path, serde_json::to_string_pretty(&self).expect("serializes"))
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn fnv1a(bytes: &[u8], seed: u64) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |b: u8| {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    };
    for b in bytes {
        eat(*b);
    }
    for b in seed.to_le_bytes() {
        eat(b);
    }
    hash
}
