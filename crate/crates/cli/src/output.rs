//! Staged artifacts, written atomically with a manifest once a command
//! has finished.

use crate::config::RunConfig;
use crate::CliError;
use itovolterra::stochastic::RNG_ID;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub rng: String,
    pub command: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<String>,
    /// The effective config; `--config manifest.json` re-runs it.
    pub config: RunConfig,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Outputs held in memory until [`Artifacts::commit`].
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
    csv: bool,
    json: bool,
}

impl Artifacts {
    pub fn new(cfg: &RunConfig) -> Artifacts {
        Artifacts {
            files: Vec::new(),
            csv: cfg.output.wants("csv"),
            json: cfg.output.wants("json"),
        }
    }

    pub fn csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), CliError> {
        if self.csv {
            let mut buf = Vec::new();
            write(&mut buf)?;
            self.files.push((name.to_string(), buf));
        }
        Ok(())
    }

    /// Pretty JSON; keys of `serde_json::Value` maps come out sorted.
    pub fn json(&mut self, name: &str, value: &impl Serialize) {
        if self.json {
            let mut buf = serde_json::to_vec_pretty(value).expect("json serializes");
            buf.push(b'\n');
            self.files.push((name.to_string(), buf));
        }
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|f| f.0.clone()).collect()
    }

    /// Writes every file through a temp file and rename, then the
    /// manifest. On failure the files written so far are removed.
    pub fn commit(self, dir: &Path, manifest: &RunManifest) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir)?;
        let mut manifest_bytes = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
        manifest_bytes.push(b'\n');
        let mut done: Vec<PathBuf> = Vec::new();
        let all = self
            .files
            .iter()
            .map(|(n, b)| (n.as_str(), b.as_slice()))
            .chain(std::iter::once(("manifest.json", manifest_bytes.as_slice())));
        for (name, bytes) in all {
            let target = dir.join(name);
            if let Err(e) = write_atomic(dir, &target, bytes) {
                for p in &done {
                    let _ = std::fs::remove_file(p);
                }
                return Err(e);
            }
            done.push(target);
        }
        Ok(done)
    }
}

fn write_atomic(dir: &Path, target: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(target).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

pub fn manifest(cfg: &RunConfig, command: &str, started: u64, outputs: Vec<String>) -> RunManifest {
    RunManifest {
        config_hash: cfg.hash(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        rng: RNG_ID.to_string(),
        command: command.to_string(),
        started_unix: started,
        finished_unix: unix_now(),
        outputs,
        config: cfg.clone(),
    }
}
