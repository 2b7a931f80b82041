//! Run manifests: every command writes one next to its primary output so
//! a run can be reproduced from the recorded flags and verified against
//! the recorded input hashes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    /// Flags as given, normalized enough to re-run the command.
    pub argv: Vec<String>,
    /// Resolved configuration after defaults.
    pub config: serde_json::Value,
    pub seed: u64,
    /// Input path -> sha256 of the bytes read.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub wall_time_seconds: f64,
}

pub struct ManifestBuilder {
    command: String,
    argv: Vec<String>,
    config: serde_json::Value,
    seed: u64,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            argv: std::env::args().skip(1).collect(),
            config,
            seed,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> anyhow::Result<()> {
        let bytes = fs::read(path)
            .with_context(|| format!("reading input `{}`", path.display()))?;
        let digest = Sha256::digest(&bytes);
        self.inputs
            .insert(path.display().to_string(), hex::encode(digest));
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Write `<primary>.manifest.json` and return its path.
    pub fn write(self, primary_output: &Path) -> anyhow::Result<PathBuf> {
        let manifest = RunManifest {
            command: self.command,
            argv: self.argv,
            config: self.config,
            seed: self.seed,
            inputs: self.inputs,
            outputs: self.outputs,
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = PathBuf::from(format!("{}.manifest.json", primary_output.display()));
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text)
            .with_context(|| format!("writing manifest `{}`", path.display()))?;
        Ok(path)
    }
}
