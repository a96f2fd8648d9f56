//! Fixture manifest: where the standard hosts live and what they hash to.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.toml";

/// `--images` shorthand for every host in the manifest.
pub const STANDARD_SET: &str = "5std";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub host: Vec<Entry>,
    #[serde(default)]
    pub payload: Vec<Entry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub id: String,
    pub file: PathBuf,
    pub sha256: String,
    pub source: String,
    pub note: Option<String>,
}

#[derive(Debug, PartialEq, Eq)]
pub enum Status {
    Verified,
    Missing,
    Mismatch(String),
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn host_paths(&self, dir: &Path) -> Vec<PathBuf> {
        self.host.iter().map(|e| dir.join(&e.file)).collect()
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Entry {
    pub fn check(&self, dir: &Path) -> Result<Status> {
        let path = dir.join(&self.file);
        if !path.exists() {
            return Ok(Status::Missing);
        }
        let actual = sha256_file(&path)?;
        Ok(if actual.eq_ignore_ascii_case(&self.sha256) {
            Status::Verified
        } else {
            Status::Mismatch(actual)
        })
    }
}
