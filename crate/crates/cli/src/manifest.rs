use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Record of one command invocation: what ran, on what, and what it produced.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub code_version: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started: String,
    pub finished: Option<String>,
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            args: std::env::args().collect(),
            config: serde_json::Value::Null,
            seed: 0,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: chrono::Utc::now().to_rfc3339(),
            finished: None,
        }
    }

    pub fn set_config<T: Serialize>(&mut self, cfg: &T, seed: u64) {
        self.set_value(serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null), seed);
    }

    pub fn set_value(&mut self, cfg: serde_json::Value, seed: u64) {
        self.config = cfg;
        self.seed = seed;
    }

    fn digest(path: &Path) -> anyhow::Result<FileDigest> {
        Ok(FileDigest { path: path.display().to_string(), sha256: sha256_file(path)? })
    }

    pub fn input(&mut self, path: &Path) -> anyhow::Result<()> {
        self.inputs.push(Self::digest(path)?);
        Ok(())
    }

    /// Records a written file; a later entry for the same path replaces the earlier one.
    pub fn output(&mut self, path: &Path) -> anyhow::Result<()> {
        let d = Self::digest(path)?;
        self.outputs.retain(|o| o.path != d.path);
        self.outputs.push(d);
        Ok(())
    }

    pub fn finish(mut self, path: &Path) -> anyhow::Result<()> {
        self.finished = Some(chrono::Utc::now().to_rfc3339());
        std::fs::write(path, serde_json::to_string_pretty(&self)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}
