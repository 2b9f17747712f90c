//! Run manifests: what went in, what came out, and why anything was
//! dropped. Re-running on identical inputs reproduces an identical
//! manifest except for the timestamp, which is the determinism contract
//! the test suite checks via [`RunManifest::content_digest`].

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::atoms::AtomStats;
use crate::baselines::PredictionStats;
use crate::config::ConfigSnapshot;
use crate::error::{Error, Result};

/// Per input layer file (one catalog entry): what ingest saw and dropped.
/// Keys look like `EA/202102/CS.geojson` (root-relative).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LayerStats {
    /// Features parsed from the file.
    pub features: u64,
    /// Features dropped because their IPC value was a sentinel code.
    pub sentinel_dropped: u64,
    /// Raw atom-classification intersections before dedup.
    pub raw_records: u64,
    /// Area fraction removed by the sliver filter during assignment.
    pub removed_area_fraction: f64,
}

/// Per assembled (period, kind) table: how raw records became panel rows.
/// Keys look like `2021-02/CS`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TableStats {
    /// Rows in the panel after dedup and the coverage rule.
    pub records: u64,
    /// Atoms that carried at least one record before dedup.
    pub classified_atoms: u64,
    /// Atoms whose records disagreed on the IPC class.
    pub conflicted_atoms: u64,
    /// conflicted / classified.
    pub dedup_rate: f64,
    /// Deduped records dropped for covered fraction below the threshold.
    pub low_coverage_dropped: u64,
}

/// Everything about one pipeline run that matters for auditing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub generated_at_unix: u64,
    pub config: ConfigSnapshot,
    /// Root-relative input path → SHA-256 of the file bytes.
    pub inputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atoms: Option<AtomStats>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub layers: BTreeMap<String, LayerStats>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tables: BTreeMap<String, TableStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictions: Option<PredictionStats>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn new(config: ConfigSnapshot) -> RunManifest {
        RunManifest {
            tool_version: crate::TOOL_VERSION.to_string(),
            generated_at_unix: now_unix(),
            config,
            inputs: BTreeMap::new(),
            atoms: None,
            layers: BTreeMap::new(),
            tables: BTreeMap::new(),
            predictions: None,
            warnings: Vec::new(),
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Format {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    /// Digest of everything except the timestamp: equal digests mean the
    /// runs were equivalent.
    pub fn content_digest(&self) -> String {
        let mut normalized = self.clone();
        normalized.generated_at_unix = 0;
        let bytes = serde_json::to_vec(&normalized).expect("manifest serializes");
        hex_digest(&bytes)
    }
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// SHA-256 of a file's bytes, streamed.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    Ok(out)
}
