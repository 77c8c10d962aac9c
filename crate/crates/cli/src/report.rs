//! Run reports, input digests and atomic artifact writes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Content hash of one input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    /// File name only, so artifacts do not depend on where inputs live.
    pub file: String,
    pub sha256: String,
}

pub fn digest_file(role: &str, path: &Path) -> CliResult<InputDigest> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(InputDigest {
        role: role.to_string(),
        file: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub role: String,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub version: &'static str,
    pub input_digests: Vec<InputDigest>,
    pub manifest: Vec<ManifestEntry>,
    pub timings_ms: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub settings: serde_json::Value,
}

/// Collects artifacts and timings for one command.
pub struct Run {
    out: PathBuf,
    force: bool,
    command: String,
    pub digests: Vec<InputDigest>,
    manifest: Vec<ManifestEntry>,
    timings: BTreeMap<String, f64>,
    pub settings: serde_json::Map<String, serde_json::Value>,
}

impl Run {
    pub fn new(command: &str, out: &Path, force: bool) -> Self {
        Self {
            out: out.to_path_buf(),
            force,
            command: command.to_string(),
            digests: Vec::new(),
            manifest: Vec::new(),
            timings: BTreeMap::new(),
            settings: serde_json::Map::new(),
        }
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    pub fn report_path(&self) -> PathBuf {
        self.out.join(format!("{}-report.json", self.command))
    }

    /// Fails with the overwrite error if any named output already exists.
    pub fn check_outputs(&self, names: &[&str]) -> CliResult<()> {
        if self.force {
            return Ok(());
        }
        let report = self.report_path();
        for path in names.iter().map(|n| self.out.join(n)).chain([report]) {
            if path.exists() {
                return Err(CliError::WouldOverwrite(path));
            }
        }
        Ok(())
    }

    pub fn add_input(&mut self, role: &str, path: &Path) -> CliResult<()> {
        if !path.is_file() {
            return Err(CliError::MissingInput(path.to_path_buf()));
        }
        let digest = digest_file(role, path)?;
        if !self.digests.contains(&digest) {
            self.digests.push(digest);
        }
        Ok(())
    }

    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let value = f();
        *self.timings.entry(stage.to_string()).or_insert(0.0) +=
            start.elapsed().as_secs_f64() * 1e3;
        value
    }

    /// Writes an artifact atomically and records it in the manifest.
    pub fn write(&mut self, name: &str, role: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.out.join(name);
        write_atomic(&path, bytes)?;
        self.manifest.push(ManifestEntry {
            path: path.clone(),
            role: role.to_string(),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(
        &mut self,
        name: &str,
        role: &str,
        value: &T,
    ) -> CliResult<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("artifact serializes");
        bytes.push(b'\n');
        self.write(name, role, &bytes)
    }

    pub fn finish(self, warnings: Vec<String>) -> CliResult<PathBuf> {
        let path = self.report_path();
        let report = RunReport {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            input_digests: self.digests,
            manifest: self.manifest,
            timings_ms: self.timings,
            warnings,
            settings: serde_json::Value::Object(self.settings),
        };
        let mut bytes = serde_json::to_vec_pretty(&report).expect("report serializes");
        bytes.push(b'\n');
        write_atomic(&path, &bytes)?;
        Ok(path)
    }
}

/// Writes to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    Ok(())
}
