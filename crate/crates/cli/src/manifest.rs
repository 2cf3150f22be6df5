use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::args::Command;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to reproduce a run and check that it was reproduced.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Command,
    pub inputs: Vec<FileDigest>,
    pub config: Value,
    pub seed: u64,
    pub version: String,
    pub wall_clock_seconds: f64,
    /// Output paths are relative to the output directory.
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn digest(path: &Path, label: PathBuf) -> mspk::Result<FileDigest> {
    let sha256 = sha256_file(path).map_err(|source| mspk::Error::Io { path: path.display().to_string(), source })?;
    Ok(FileDigest { path: label, sha256 })
}

pub fn manifest_path(out_dir: &Path, command: &str) -> PathBuf {
    out_dir.join(format!("{command}.manifest.json"))
}
