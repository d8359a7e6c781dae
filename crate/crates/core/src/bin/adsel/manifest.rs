//! Output directories and the run manifest written into each of them.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use adsel::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Content hash of one ingested file.
#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: PathBuf,
    pub bytes: usize,
    pub sha256: String,
}

impl InputDigest {
    pub fn new(role: &str, path: &Path, bytes: &[u8]) -> Self {
        Self {
            role: role.to_owned(),
            path: path.to_path_buf(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        }
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    arguments: Vec<String>,
    /// SHA-256 of `config.json` in this directory.
    config_sha256: String,
    config_file_sha256: Option<String>,
    ablation: Option<String>,
    inputs: &'a [InputDigest],
    outputs: &'a [String],
    threads: usize,
    started_unix_secs: u64,
    finished_unix_secs: u64,
    elapsed_secs: f64,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Collects the files a command writes and finishes with `manifest.json`.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
    started: Instant,
    started_unix: u64,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            started: Instant::now(),
            started_unix: unix_now(),
        })
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|source| Error::Io { path, source })?;
        self.written.push(name.to_owned());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text)
    }

    /// Writes `config.json` (the effective configuration; for model commands
    /// it is reusable with `--config`) and `manifest.json`.
    pub fn finish<C: Serialize>(
        mut self,
        command: &str,
        cfg: &C,
        config_file: Option<&[u8]>,
        inputs: &[InputDigest],
    ) -> Result<PathBuf> {
        let config_value = serde_json::to_value(cfg)?;
        let mut config_text = serde_json::to_string_pretty(&config_value)?;
        config_text.push('\n');
        self.write("config.json", &config_text)?;
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            arguments: std::env::args().skip(1).collect(),
            config_sha256: sha256_hex(config_text.as_bytes()),
            config_file_sha256: config_file.map(sha256_hex),
            ablation: config_value.get("ablation").and_then(|v| v.as_str()).map(str::to_owned),
            inputs,
            outputs: &self.written,
            threads: rayon::current_num_threads(),
            started_unix_secs: self.started_unix,
            finished_unix_secs: unix_now(),
            elapsed_secs: self.started.elapsed().as_secs_f64(),
        };
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        Ok(self.dir)
    }
}
