//! Content-addressed stage manifests.
//!
//! A manifest records what a stage consumed (hashes of the configuration and
//! of upstream manifests) and what it wrote (hashes of every artifact). It
//! carries no timestamps, so identical runs produce identical manifests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: &Path) -> CliResult<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub version: String,
    pub seed: u64,
    /// Hash over `inputs`; the stage is skipped when it is unchanged.
    pub inputs_hash: String,
    /// Named input hashes: the configuration and each upstream manifest.
    pub inputs: BTreeMap<String, String>,
    /// Artifact file name to SHA-256 of its content.
    pub artifacts: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(stage: &str, seed: u64, inputs: BTreeMap<String, String>) -> Self {
        let mut text = String::new();
        for (k, v) in &inputs {
            text.push_str(k);
            text.push('=');
            text.push_str(v);
            text.push('\n');
        }
        Manifest {
            stage: stage.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            inputs_hash: sha256_hex(format!("{stage}\n{text}").as_bytes()),
            inputs,
            artifacts: BTreeMap::new(),
        }
    }

    pub fn read(dir: &Path) -> CliResult<Option<Manifest>> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path)?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| CliError::other(format!("corrupt manifest {}: {e}", path.display())))
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    /// True when every recorded artifact exists with the recorded content.
    pub fn artifacts_intact(&self, dir: &Path) -> bool {
        self.artifacts.iter().all(|(name, hash)| {
            let p = dir.join(name);
            p.is_file() && hash_file(&p).is_ok_and(|h| &h == hash)
        })
    }

    /// Hash of the manifest file itself, used as the input hash downstream.
    pub fn digest(&self) -> CliResult<String> {
        Ok(sha256_hex(serde_json::to_string_pretty(self)?.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn inputs_hash_depends_on_stage_and_inputs() {
        let mut a = BTreeMap::new();
        a.insert("config".to_string(), "x".to_string());
        let m1 = Manifest::new("run-truth", 1, a.clone());
        let m2 = Manifest::new("run-truth", 1, a.clone());
        assert_eq!(m1.inputs_hash, m2.inputs_hash);
        assert_ne!(m1.inputs_hash, Manifest::new("learn-dict", 1, a.clone()).inputs_hash);
        a.insert("config".to_string(), "y".to_string());
        assert_ne!(m1.inputs_hash, Manifest::new("run-truth", 1, a).inputs_hash);
    }
}
