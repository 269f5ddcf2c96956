//! File helpers and the run manifest written next to every output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::failure::{CmdResult, Failure};

pub fn read_bytes(path: &Path) -> CmdResult<Vec<u8>> {
    fs::read(path).map_err(|e| Failure::io(path, e))
}

pub fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> CmdResult {
    fs::write(path, contents).map_err(|e| Failure::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
    s.push('\n');
    write(path, s)
}

/// Runs a writer into an in-memory buffer, then saves it.
pub fn write_with(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> mvswap::Result<()>) -> CmdResult {
    let mut buf = Vec::new();
    f(&mut buf)?;
    write(path, buf)
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

#[derive(Debug, Serialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to rerun a command and check its inputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    /// Configuration files among the inputs.
    pub config: Vec<PathBuf>,
    pub inputs: Vec<InputHash>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            config: Vec::new(),
            inputs: Vec::new(),
            seed: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: timestamp(),
        }
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(InputHash {
            path: path.to_path_buf(),
            sha256: sha256_hex(bytes),
        });
    }

    pub fn config(&mut self, path: &Path, bytes: &[u8]) {
        self.config.push(path.to_path_buf());
        self.input(path, bytes);
    }

    pub fn save(&self, dir: &Path) -> CmdResult {
        write_json(&dir.join("manifest.json"), self)
    }
}

/// `SOURCE_DATE_EPOCH` when set, so reruns can be byte-identical;
/// otherwise the current time.
fn timestamp() -> String {
    let fixed = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| DateTime::<Utc>::from_timestamp(secs, 0));
    fixed
        .unwrap_or_else(Utc::now)
        .to_rfc3339_opts(SecondsFormat::Secs, true)
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
}
