//! Output-directory plumbing: atomic writes, content hashes, per-command
//! metadata.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Write via a temp file in the same directory, then rename into place.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", tmp.display())))?;
        f.write_all(contents)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", tmp.display())))?;
        f.flush()
            .map_err(|e| CliError::Data(format!("cannot flush {}: {e}", tmp.display())))?;
    }
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::Data(format!("cannot move into {}: {e}", path.display())))?;
    Ok(())
}

/// Metadata emitted next to every command's artifacts: content hashes of
/// the inputs, the seeds in play, counts, and the outputs written.
#[derive(Debug, Serialize)]
pub struct Metadata {
    pub command: String,
    pub version: String,
    pub inputs: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub counts: BTreeMap<String, u64>,
    pub outputs: Vec<String>,
}

impl Metadata {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: BTreeMap::new(),
            seeds: BTreeMap::new(),
            counts: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn count(&mut self, name: &str, value: usize) {
        self.counts.insert(name.to_string(), value as u64);
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs
            .insert(path.display().to_string(), hash_file(path)?);
        Ok(())
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_string(), value);
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(&self, out_dir: &Path) -> Result<(), CliError> {
        let path = out_dir.join(format!("{}_meta.json", self.command.replace('-', "_")));
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Data(format!("metadata serialization: {e}")))?;
        atomic_write(&path, json.as_bytes())
    }
}

pub fn out_path(out_dir: &Path, name: &str) -> PathBuf {
    out_dir.join(name)
}
