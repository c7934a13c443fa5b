use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Record of one harness run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub verb: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub files: Vec<ManifestFile>,
    pub wall_clock_seconds: BTreeMap<String, f64>,
    pub violations: usize,
    pub status: String,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

impl RunManifest {
    pub fn new(verb: &str, config_hash: &str, seed: u64) -> Self {
        Self {
            verb: verb.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.to_string(),
            seed,
            threads: rayon::current_num_threads(),
            files: Vec::new(),
            wall_clock_seconds: BTreeMap::new(),
            violations: 0,
            status: "running".into(),
        }
    }

    /// Records a file that already exists under `dir`.
    pub fn add_file(&mut self, dir: &Path, name: &str) -> Result<()> {
        let p = dir.join(name);
        let meta = std::fs::metadata(&p)?;
        self.files.push(ManifestFile {
            path: name.to_string(),
            bytes: meta.len(),
            sha256: sha256_file(&p)?,
        });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let p = dir.join("manifest.json");
        std::fs::write(&p, serde_json::to_string_pretty(self)?)?;
        Ok(p)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Checks that every listed file exists with the recorded size and digest.
    pub fn verify_files(&self, dir: &Path) -> Result<()> {
        for f in &self.files {
            let p = dir.join(&f.path);
            let digest = sha256_file(&p)?;
            if digest != f.sha256 {
                return Err(Error::Numerics(format!("{} changed since the run", f.path)));
            }
        }
        Ok(())
    }
}
