//! Run manifests: the invocation, input and output digests and timing of a run.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LdError, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    /// Full argument list after the program name.
    pub args: Vec<String>,
    pub seed: Option<u64>,
    /// Absolute input path to SHA-256 digest.
    pub inputs: BTreeMap<String, String>,
    /// Output file name to SHA-256 digest.
    pub outputs: BTreeMap<String, String>,
    pub status: String,
    pub threads: usize,
    pub timestamp_unix: u64,
    pub wall_time_s: f64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>, seed: Option<u64>) -> Self {
        Self {
            manifest_version: MANIFEST_VERSION,
            tool: env!("CARGO_PKG_NAME").into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args,
            seed,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            status: "complete".into(),
            threads: rayon::current_num_threads(),
            timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            wall_time_s: 0.0,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let abs = fs::canonicalize(path)?;
        let digest = sha256_file(&abs)?;
        self.inputs.insert(abs.to_string_lossy().into_owned(), digest);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        let name = path
            .file_name()
            .ok_or_else(|| LdError::InvalidConfig(format!("output path {} has no file name", path.display())))?
            .to_string_lossy()
            .into_owned();
        self.outputs.insert(name, sha256_file(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| LdError::Parse(e.to_string()))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| LdError::Parse(format!("manifest {}: {e}", path.display())))
    }

    /// Inputs whose current digest differs from the recorded one.
    pub fn changed_inputs(&self) -> Vec<String> {
        self.inputs
            .iter()
            .filter(|(p, d)| sha256_file(Path::new(p)).ok().as_deref() != Some(d.as_str()))
            .map(|(p, _)| p.clone())
            .collect()
    }
}
