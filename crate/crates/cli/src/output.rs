use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub status: &'static str,
    pub detail: String,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.status == "PASS"
    }
}

/// Artifacts and check results collected in memory before anything is written.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
    checks: Vec<CheckRow>,
    notes: serde_json::Map<String, serde_json::Value>,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn file(&mut self, name: &str, contents: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), contents.into()));
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) {
        let mut text = serde_json::to_string_pretty(value).expect("report serialises");
        text.push('\n');
        self.file(name, text);
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(CheckRow {
            name: name.to_string(),
            status: if passed { "PASS" } else { "FAIL" },
            detail: detail.into(),
        });
    }

    pub fn note(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.notes.insert(key.to_string(), value.into());
    }

    pub fn checks(&self) -> &[CheckRow] {
        &self.checks
    }

    pub fn file_names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn contents(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_slice())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub notes: serde_json::Map<String, serde_json::Value>,
    pub files: Vec<FileEntry>,
    pub checks: Vec<CheckRow>,
    pub status: &'static str,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.manifest.status == "PASS"
    }

    pub fn failed_checks(&self) -> Vec<String> {
        self.manifest
            .checks
            .iter()
            .filter(|c| !c.passed())
            .map(|c| c.name.clone())
            .collect()
    }

    /// `Err(AssertionFailed)` naming every failed check.
    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            Ok(self)
        } else {
            Err(CliError::AssertionFailed(self.failed_checks()))
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes every artifact and then `manifest.json` into `dir`.
pub fn write_outputs(
    dir: &Path,
    experiment: &str,
    seed: u64,
    config: serde_json::Value,
    outputs: Outputs,
) -> Result<RunSummary> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::with_capacity(outputs.files.len());
    for (name, contents) in &outputs.files {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        files.push(FileEntry {
            path: name.clone(),
            bytes: contents.len(),
            sha256: sha256_hex(contents),
        });
    }
    let status = if outputs.checks.iter().all(CheckRow::passed) { "PASS" } else { "FAIL" };
    let manifest = Manifest {
        experiment: experiment.to_string(),
        seed,
        config,
        notes: outputs.notes,
        files,
        checks: outputs.checks,
        status,
    };
    let path = dir.join(MANIFEST);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(RunSummary {
        output_dir: dir.to_path_buf(),
        manifest,
    })
}
