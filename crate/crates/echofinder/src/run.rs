//! Run manifests: a record of each CLI invocation, written atomically when
//! the command finishes.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fsutil::write_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Full argument list, enough to replay the run.
    pub args: Vec<String>,
    pub config_hash: String,
    pub inputs: Vec<String>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub outputs: Vec<String>,
    pub threads: usize,
    pub duration_s: f64,
}

/// Collects manifest fields while a command runs.
pub struct RunRecorder {
    started: Instant,
    manifest: RunManifest,
}

impl RunRecorder {
    pub fn start(command: &str, config_hash: String, seed: Option<u64>, threads: usize) -> Self {
        Self {
            started: Instant::now(),
            manifest: RunManifest {
                command: command.to_string(),
                args: std::env::args().skip(1).collect(),
                config_hash,
                inputs: Vec::new(),
                seed,
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                outputs: Vec::new(),
                threads,
                duration_s: 0.0,
            },
        }
    }

    pub fn input(&mut self, p: &Path) {
        self.manifest.inputs.push(p.display().to_string());
    }

    pub fn output(&mut self, p: &Path) {
        self.manifest.outputs.push(p.display().to_string());
    }

    /// Stamps the duration and writes the manifest to `path`.
    pub fn finish(mut self, path: &Path) -> Result<RunManifest> {
        self.manifest.duration_s = self.started.elapsed().as_secs_f64();
        write_json(path, &self.manifest)?;
        Ok(self.manifest)
    }
}

/// Manifest location for a command whose output is a directory.
pub fn manifest_in_dir(dir: &Path) -> PathBuf {
    dir.join("run.json")
}

/// Manifest location for a command whose output is a single file:
/// `<file>.run.json`.
pub fn manifest_beside(file: &Path) -> PathBuf {
    let mut name = file.file_name().unwrap_or_default().to_os_string();
    name.push(".run.json");
    file.with_file_name(name)
}
