//! Run manifests: every command records its full resolved configuration,
//! tool version, timestamps and the SHA-256 digest of each file it read or
//! wrote. Re-running a command with the configuration stored in a manifest
//! reproduces the data files byte for byte (stochastic commands are pinned
//! by their seed).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

pub struct Manifest {
    command: String,
    started_utc: String,
    resolved: Vec<(String, String)>,
    extra: Vec<(String, String)>,
    inputs: Vec<(PathBuf, String)>,
    outputs: Vec<(PathBuf, String)>,
}

impl Manifest {
    pub fn new(command: &str, resolved: &[(String, String)]) -> Self {
        Manifest {
            command: command.to_string(),
            started_utc: chrono::Utc::now().to_rfc3339(),
            resolved: resolved.to_vec(),
            extra: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.extra.push((key.to_string(), value.to_string()));
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let digest = digest_file(path)?;
        self.inputs.push((path.to_path_buf(), digest));
        Ok(())
    }

    /// Write a data file atomically (temp file + rename) and record its digest.
    pub fn write_output(&mut self, path: &Path, contents: &str) -> Result<()> {
        write_atomic(path, contents)?;
        let mut hasher = Sha256::new();
        hasher.update(contents.as_bytes());
        self.outputs
            .push((path.to_path_buf(), format!("{:x}", hasher.finalize())));
        Ok(())
    }

    /// Write the manifest itself next to the outputs.
    pub fn finish(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        let _ = writeln!(text, "command = {}", self.command);
        let _ = writeln!(text, "version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(text, "started_utc = {}", self.started_utc);
        let _ = writeln!(text, "finished_utc = {}", chrono::Utc::now().to_rfc3339());
        for (key, value) in &self.extra {
            let _ = writeln!(text, "{key} = {value}");
        }
        for (path, digest) in &self.inputs {
            let _ = writeln!(text, "input.{} = sha256:{digest}", path.display());
        }
        for (path, digest) in &self.outputs {
            let _ = writeln!(text, "output.{} = sha256:{digest}", path.display());
        }
        for (key, value) in &self.resolved {
            let _ = writeln!(text, "config.{key} = {value}");
        }
        write_atomic(path, &text)
    }
}

pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn digest_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}
