use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use claimlot::GENERATOR_VERSION;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Everything needed to rerun a command and check its outputs.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub generator_version: &'static str,
    pub code_version: &'static str,
    pub parallel: bool,
    pub threads: usize,
    /// Resolved configuration in the same TOML format `--config` reads.
    pub config: String,
    pub outputs: Vec<OutputDigest>,
    pub metadata: BTreeMap<String, String>,
    pub timings_ms: BTreeMap<String, u128>,
    pub finished_unix: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Collects output files for one run and writes them with a manifest.
pub struct Outputs {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Outputs {
    pub fn new(dir: &Path, command: &str, seed: u64, config: String) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                seed,
                generator_version: GENERATOR_VERSION,
                code_version: env!("CARGO_PKG_VERSION"),
                parallel: claimlot::par::is_parallel(),
                threads: claimlot::par::current_threads(),
                config,
                outputs: Vec::new(),
                metadata: BTreeMap::new(),
                timings_ms: BTreeMap::new(),
                finished_unix: 0,
            },
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        self.manifest.outputs.push(OutputDigest {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn timing(&mut self, step: &str, elapsed: Duration) {
        self.manifest.timings_ms.insert(step.to_string(), elapsed.as_millis());
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.manifest.metadata.insert(key.to_string(), value.to_string());
    }

    pub fn finish(mut self) -> Result<RunManifest, CliError> {
        self.manifest.finished_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        let json = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        let path = self.dir.join("manifest.json");
        fs::write(&path, json).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        Ok(self.manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_lists_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut o = Outputs::new(dir.path(), "test", 3, String::new()).unwrap();
        o.write("a.csv", b"x\n1\n").unwrap();
        let m = o.finish().unwrap();
        assert_eq!(m.outputs.len(), 1);
        assert!(dir.path().join("manifest.json").exists());
    }
}
