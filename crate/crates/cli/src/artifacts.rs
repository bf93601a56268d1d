//! Staged artifact output with a manifest.
//!
//! Files are written under `<out>/.partial/` first. Only a run that finishes
//! moves them into `<out>/` and writes `manifest.json`, so a failed run never
//! replaces artifacts of an earlier complete one; it leaves its own partial
//! files and a manifest with status `partial` in the staging directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const STAGING_DIR: &str = ".partial";
pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactHash {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dir: String,
    pub seeds: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    /// `complete` or `partial`.
    pub status: String,
    pub steps: Vec<String>,
    pub seeds: BTreeMap<String, u64>,
    pub runs: Vec<RunRecord>,
    pub artifacts: Vec<ArtifactHash>,
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct Output {
    root: PathBuf,
    staging: PathBuf,
    files: Vec<ArtifactHash>,
}

impl Output {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        let staging = root.join(STAGING_DIR);
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| CliError::io(&staging, e))?;
        }
        fs::create_dir_all(&staging).map_err(|e| CliError::io(&staging, e))?;
        Ok(Self { root: root.to_path_buf(), staging, files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.staging.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.files.push(ArtifactHash { file: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Numeric(e.to_string()))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn artifacts(&self) -> &[ArtifactHash] {
        &self.files
    }

    /// Moves staged files into place, then writes the manifest.
    pub fn commit(self, mut manifest: Manifest) -> Result<(), CliError> {
        for f in &self.files {
            let from = self.staging.join(&f.file);
            let to = self.root.join(&f.file);
            if let Some(parent) = to.parent() {
                fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
            }
            fs::rename(&from, &to).map_err(|e| CliError::io(&to, e))?;
        }
        manifest.artifacts = self.files.clone();
        let staged = self.staging.join(MANIFEST);
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Numeric(e.to_string()))?;
        bytes.push(b'\n');
        fs::write(&staged, &bytes).map_err(|e| CliError::io(&staged, e))?;
        let target = self.root.join(MANIFEST);
        fs::rename(&staged, &target).map_err(|e| CliError::io(&target, e))?;
        fs::remove_dir_all(&self.staging).map_err(|e| CliError::io(&self.staging, e))
    }

    /// Records a failed run inside the staging directory.
    pub fn abandon(self, mut manifest: Manifest) -> Result<PathBuf, CliError> {
        manifest.artifacts = self.files.clone();
        let path = self.staging.join(MANIFEST);
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Numeric(e.to_string()))?;
        bytes.push(b'\n');
        fs::write(&path, &bytes).map_err(|e| CliError::io(&path, e))?;
        Ok(self.staging)
    }
}
