//! Run manifest embedded in every emitted report: enough to re-run the
//! command and verify the inputs were the same.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ivw_pipeline::PipelineConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub provider: String,
    /// Resolved configuration snapshot.
    pub config: serde_json::Value,
    /// SHA-256 digests of the input files, keyed by path as given.
    pub input_digests: BTreeMap<String, String>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

impl RunManifest {
    pub fn new(
        command: impl Into<String>,
        cfg: &PipelineConfig,
        provider: impl Into<String>,
        fixed_epoch: Option<u64>,
    ) -> Self {
        let now = current_epoch(fixed_epoch);
        Self {
            schema_version: 1,
            command: command.into(),
            seed: cfg.seed,
            provider: provider.into(),
            config: serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null),
            input_digests: BTreeMap::new(),
            started_unix: now,
            finished_unix: now,
        }
    }

    pub fn digest_input(&mut self, path: &Path) -> std::io::Result<()> {
        let bytes = std::fs::read(path)?;
        let digest = Sha256::digest(&bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.input_digests.insert(path.display().to_string(), hex);
        Ok(())
    }

    pub fn finish(&mut self, fixed_epoch: Option<u64>) {
        self.finished_unix = current_epoch(fixed_epoch);
    }
}

/// Wall-clock seconds, overridable for byte-reproducible outputs.
pub fn current_epoch(fixed: Option<u64>) -> u64 {
    fixed.unwrap_or_else(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    })
}
