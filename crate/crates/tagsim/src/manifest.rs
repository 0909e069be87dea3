//! The manifest written beside every run's outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::{Deserialize, Serialize};

use crate::formats::json_bytes;
use crate::io::{file_sha256, sha256_hex, write_file};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Path relative to the manifest's directory when inside it, else the
    /// bare file name; absolute locations would differ between reruns.
    pub file: String,
    pub sha256: String,
}

/// No timestamps or host details: reruns with equal inputs give equal bytes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// Collects digests while a subcommand runs, then writes itself.
#[derive(Debug)]
pub struct ManifestBuilder {
    dir: PathBuf,
    manifest: Manifest,
}

fn display_name(dir: &Path, path: &Path) -> String {
    match path.strip_prefix(dir) {
        Ok(rel) if !rel.as_os_str().is_empty() => rel.to_string_lossy().replace('\\', "/"),
        _ => path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned()),
    }
}

impl ManifestBuilder {
    /// `dir` is where the manifest file will live.
    pub fn new(command: &str, dir: &Path, config: BTreeMap<String, String>) -> Self {
        ManifestBuilder {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                tool: String::from(env!("CARGO_PKG_NAME")),
                version: String::from(env!("CARGO_PKG_VERSION")),
                command: String::from(command),
                config,
                inputs: Vec::new(),
                outputs: Vec::new(),
            },
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let sha256 = file_sha256(path)?;
        self.manifest.inputs.push(FileDigest { file: display_name(&self.dir, path), sha256 });
        Ok(())
    }

    /// Writes `bytes` to `path` and records the digest.
    pub fn output(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_file(path, bytes)?;
        self.record_output(path, sha256_hex(bytes));
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path, sha256: String) {
        self.manifest.outputs.push(FileDigest { file: display_name(&self.dir, path), sha256 });
    }

    /// Writes the manifest to `path` (normally `dir/manifest.json`).
    pub fn finish_at(self, path: &Path) -> Result<Manifest> {
        write_file(path, &json_bytes(&self.manifest)?)?;
        Ok(self.manifest)
    }

    pub fn finish(self) -> Result<Manifest> {
        let path = self.dir.join(MANIFEST);
        self.finish_at(&path)
    }
}

/// Manifest path for a single-file output: `<file>.manifest.json`.
pub fn manifest_beside(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}
