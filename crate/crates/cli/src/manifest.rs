use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Record of one command run, written next to its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileDigest>,
    /// Paths relative to the output directory.
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Collects inputs and outputs of a run and writes the manifest last.
pub struct Run {
    out: PathBuf,
    manifest: RunManifest,
}

impl Run {
    /// Claims `out` for this run. An existing non-empty directory is only
    /// reused with `force`.
    pub fn start(command: &str, out: &Path, force: bool, config: serde_json::Value) -> Result<Self, CliError> {
        if out.exists() {
            if !out.is_dir() {
                return Err(CliError::usage(format!("{} exists and is not a directory", out.display())));
            }
            let non_empty = fs::read_dir(out)?.next().is_some();
            if non_empty && !force {
                return Err(CliError::usage(format!(
                    "output directory {} is not empty; pass --force to reuse it",
                    out.display()
                )));
            }
        }
        fs::create_dir_all(out)?;
        Ok(Self {
            out: out.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                config,
                seeds: BTreeMap::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
            },
        })
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.manifest.seeds.insert(name.to_string(), value);
    }

    /// Verifies `path` against the manifest of the run that produced it (if
    /// its directory has one) and records its digest.
    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let digest = verify_input(path)?;
        if let Ok(a) = path.canonicalize() {
            if a.parent() == self.out.canonicalize().ok().as_deref() {
                return Err(CliError::usage(format!(
                    "{} lies in the output directory; choose another --out",
                    path.display()
                )));
            }
        }
        self.manifest.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: digest,
        });
        Ok(())
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn output(&mut self, name: &str) -> Result<(), CliError> {
        let digest = sha256_file(&self.out.join(name))?;
        self.manifest.outputs.push(FileDigest {
            path: name.to_string(),
            sha256: digest,
        });
        Ok(())
    }

    pub fn finish(self) -> Result<RunManifest, CliError> {
        let text = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::data(e.to_string()))?;
        fs::write(self.out.join(MANIFEST_FILE), text)?;
        Ok(self.manifest)
    }
}

/// Digest of `path`, after checking it against a sibling manifest that
/// lists it as an output.
pub fn verify_input(path: &Path) -> Result<String, CliError> {
    let digest = sha256_file(path)?;
    let Some(dir) = path.parent() else {
        return Ok(digest);
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.exists() {
        return Ok(digest);
    }
    let text = fs::read_to_string(&manifest_path)?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::data(format!("unreadable manifest {}: {e}", manifest_path.display())))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    if let Some(rec) = manifest.outputs.iter().find(|o| o.path == name) {
        if rec.sha256 != digest {
            return Err(CliError::data(format!(
                "{} does not match the digest recorded by `{}` in {} (recorded {}, found {}); \
                 the file changed after it was produced, so rerun that step",
                path.display(),
                manifest.command,
                manifest_path.display(),
                rec.sha256,
                digest
            )));
        }
    }
    Ok(digest)
}
