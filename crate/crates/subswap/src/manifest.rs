//! Run manifests: what produced the files in an output directory.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::hex_digest;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

impl FileEntry {
    pub fn of(dir: &Path, name: &str) -> Result<Self> {
        let bytes = std::fs::read(dir.join(name)).with_context(|| format!("cannot hash {name}"))?;
        Ok(FileEntry {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex_digest(&bytes),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub artifact_version: String,
    pub command: String,
    pub config_sha256: String,
    pub master_seed: u64,
    pub started_unix_s: u64,
    pub wall_clock_s: f64,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn file_name(command: &str) -> String {
        format!("manifest-{command}.json")
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(Self::file_name(&self.command));
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn read(dir: &Path, command: &str) -> Result<Self> {
        let path = dir.join(Self::file_name(command));
        let text = std::fs::read_to_string(&path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Every listed file still exists with the recorded digest.
    pub fn files_intact(&self, dir: &Path) -> bool {
        self.files
            .iter()
            .all(|f| FileEntry::of(dir, &f.path).is_ok_and(|now| now == *f))
    }
}
