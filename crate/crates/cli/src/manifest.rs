//! Run manifests: what was run, on which scenario and seed, and the
//! checksum of every file it wrote.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use cpi_core::io::file_sha256;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub scenario_hash: String,
    pub seeds: Vec<u64>,
    pub version: String,
    pub started: String,
    pub finished: String,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
}

pub fn now() -> String {
    OffsetDateTime::now_utc().format(&Rfc3339).unwrap_or_default()
}

pub fn manifest_path(out_dir: &Path, command: &str) -> PathBuf {
    out_dir.join(format!("{command}.manifest.json"))
}

fn entry(base: &Path, file: &Path) -> Result<FileEntry, CliError> {
    let rel = file.strip_prefix(base).unwrap_or(file);
    Ok(FileEntry {
        path: rel.to_string_lossy().into_owned(),
        sha256: file_sha256(file)?,
        bytes: std::fs::metadata(file)?.len(),
    })
}

/// Accumulates the files of one run and writes the manifest at the end.
pub struct Recorder {
    out_dir: PathBuf,
    manifest: RunManifest,
    outputs: Vec<PathBuf>,
    inputs: Vec<PathBuf>,
}

impl Recorder {
    pub fn start(out_dir: &Path, command: &str, scenario_hash: String) -> Self {
        Recorder {
            out_dir: out_dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                args: std::env::args().skip(1).collect(),
                scenario_hash,
                seeds: Vec::new(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                started: now(),
                finished: String::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
            },
            outputs: Vec::new(),
            inputs: Vec::new(),
        }
    }

    pub fn seed(&mut self, seed: u64) {
        self.manifest.seeds.push(seed);
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Path for an output file, registered for checksumming.
    pub fn output(&mut self, name: &str) -> PathBuf {
        let p = self.out_dir.join(name);
        self.outputs.push(p.clone());
        p
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        for p in &self.inputs {
            self.manifest.inputs.push(entry(&self.out_dir, p)?);
        }
        for p in &self.outputs {
            self.manifest.outputs.push(entry(&self.out_dir, p)?);
        }
        self.manifest.finished = now();
        let path = manifest_path(&self.out_dir, &self.manifest.command);
        let text = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| CliError::Io(format!("cannot serialise manifest: {e}")))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: malformed manifest: {e}", path.display())))
}

/// Problems found re-checking one manifest's outputs.
pub fn check_outputs(path: &Path) -> Result<Vec<String>, CliError> {
    let m = read_manifest(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut problems = Vec::new();
    for f in &m.outputs {
        let file = base.join(&f.path);
        if !file.exists() {
            problems.push(format!("{}: missing", f.path));
            continue;
        }
        let sum = file_sha256(&file)?;
        if sum != f.sha256 {
            problems.push(format!("{}: checksum {sum} does not match recorded {}", f.path, f.sha256));
        }
    }
    Ok(problems)
}
