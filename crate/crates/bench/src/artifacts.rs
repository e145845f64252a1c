//! Output directories and their manifests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::{sha256_hex, to_json, write_atomic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    /// Absent for volatile files (wall-clock data).
    pub sha256: Option<String>,
    pub schema: Option<String>,
    pub schema_version: Option<u32>,
    pub volatile: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigHash {
    pub role: String,
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub configs: Vec<ConfigHash>,
    pub seeds: Vec<(String, u64)>,
    pub artifacts: Vec<ArtifactEntry>,
    /// `ok` or `numerical-failure`.
    pub status: String,
    pub notes: Vec<String>,
}

/// Collects files written to one output directory.
#[derive(Debug)]
pub struct ArtifactDir {
    dir: PathBuf,
    manifest: Manifest,
}

impl ArtifactDir {
    pub fn new(dir: &Path, command: &str) -> Self {
        Self {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                configs: Vec::new(),
                seeds: Vec::new(),
                artifacts: Vec::new(),
                status: "ok".into(),
                notes: Vec::new(),
            },
        }
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, file: &str, bytes: &[u8], schema: Option<(&str, u32)>) -> Result<()> {
        self.put(file, bytes, schema, false)
    }

    pub fn write_volatile(&mut self, file: &str, bytes: &[u8], schema: Option<(&str, u32)>) -> Result<()> {
        self.put(file, bytes, schema, true)
    }

    fn put(&mut self, file: &str, bytes: &[u8], schema: Option<(&str, u32)>, volatile: bool) -> Result<()> {
        write_atomic(&self.dir.join(file), bytes)?;
        self.manifest.artifacts.retain(|a| a.file != file);
        self.manifest.artifacts.push(ArtifactEntry {
            file: file.into(),
            sha256: (!volatile).then(|| sha256_hex(bytes)),
            schema: schema.map(|s| s.0.into()),
            schema_version: schema.map(|s| s.1),
            volatile,
        });
        Ok(())
    }

    /// Lists a file written by someone else, such as a step manifest.
    pub fn record(&mut self, file: &str, sha256: String) {
        self.manifest.artifacts.retain(|a| a.file != file);
        self.manifest.artifacts.push(ArtifactEntry {
            file: file.into(),
            sha256: Some(sha256),
            schema: Some("manifest".into()),
            schema_version: None,
            volatile: false,
        });
    }

    /// Writes a configuration copy and records its hash.
    pub fn config(&mut self, role: &str, name: &str, file: &str, text: &str) -> Result<()> {
        self.manifest.configs.push(ConfigHash { role: role.into(), name: name.into(), sha256: sha256_hex(text.as_bytes()) });
        self.write(file, text.as_bytes(), None)
    }

    pub fn seed(&mut self, stream: &str, seed: u64) {
        self.manifest.seeds.push((stream.into(), seed));
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.manifest.notes.push(note.into());
    }

    pub fn mark_failed(&mut self) {
        self.manifest.status = "numerical-failure".into();
    }

    /// Writes `manifest.json` last, so its presence marks a finished step.
    pub fn finish(self) -> Result<Manifest> {
        write_atomic(&self.dir.join("manifest.json"), &to_json(&self.manifest))?;
        Ok(self.manifest)
    }
}
