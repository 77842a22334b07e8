use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

/// Everything needed to rerun a command: resolved settings, input digests,
/// seed and produced files.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub config: Map<String, Value>,
    pub inputs: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub outputs: Vec<PathBuf>,
    pub extra: Map<String, Value>,
    pub elapsed_ms: u128,
}

pub struct ManifestBuilder {
    command: String,
    inputs: BTreeMap<String, String>,
    outputs: Vec<PathBuf>,
    extra: Map<String, Value>,
    started: Instant,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            extra: Map::new(),
            started: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn extra(&mut self, key: &str, value: impl Serialize) {
        self.extra
            .insert(key.to_string(), serde_json::to_value(value).expect("manifest values serialize"));
    }

    /// Write `<primary>.manifest.json`.
    pub fn write(self, primary: &Path, config: &Map<String, Value>, seed: Option<u64>) -> Result<PathBuf> {
        let m = RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            config: config.clone(),
            inputs: self.inputs,
            seed,
            outputs: self.outputs,
            extra: self.extra,
            elapsed_ms: self.started.elapsed().as_millis(),
        };
        let mut name = primary.as_os_str().to_owned();
        name.push(".manifest.json");
        let path = PathBuf::from(name);
        std::fs::write(&path, serde_json::to_string_pretty(&m)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
