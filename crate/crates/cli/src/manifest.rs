//! Run manifests: a content-addressed record of what a command read and
//! wrote. One manifest per command invocation; every output file the
//! command produces is listed in exactly one manifest. Written atomically
//! after the outputs exist (or with a failure marker when a stage aborts,
//! so partial outputs stay auditable).

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub timestamp_unix: u64,
    /// Hash of the effective configuration (flags merged over file).
    pub config_sha256: String,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn hash_file(path: &Path) -> Result<FileRecord, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(FileRecord {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

pub struct ManifestBuilder {
    command: String,
    config_sha256: String,
    inputs: Vec<FileRecord>,
    outputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn new(command: &str, effective_config: &impl Serialize) -> Self {
        let config_bytes = serde_json::to_vec(effective_config).unwrap_or_default();
        Self {
            command: command.to_string(),
            config_sha256: sha256_hex(&config_bytes),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.push(hash_file(path)?);
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    fn assemble(&self, status: &str, failed_stage: Option<String>) -> Result<RunManifest, CliError> {
        let mut outputs = Vec::new();
        for p in &self.outputs {
            if p.exists() {
                outputs.push(hash_file(p)?);
            }
        }
        Ok(RunManifest {
            command: self.command.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            config_sha256: self.config_sha256.clone(),
            inputs: self.inputs.clone(),
            outputs,
            status: status.to_string(),
            failed_stage,
        })
    }

    /// Write the success manifest next to the outputs.
    pub fn finish(&self, manifest_path: &Path) -> Result<(), CliError> {
        let manifest = self.assemble("ok", None)?;
        cslbound::io::write_json(manifest_path, &manifest).map_err(CliError::from)
    }

    /// Write a failure manifest naming the stage that aborted; partial
    /// outputs produced so far are still listed.
    pub fn finish_failed(&self, manifest_path: &Path, stage: &str) -> Result<(), CliError> {
        let manifest = self.assemble("failed", Some(stage.to_string()))?;
        cslbound::io::write_json(manifest_path, &manifest).map_err(CliError::from)
    }
}
