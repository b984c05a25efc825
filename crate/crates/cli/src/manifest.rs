//! Run manifest written beside every output image.

use std::path::{Path, PathBuf};
use std::time::Instant;

use otsynth::pipeline::SynthesisConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::settings::Resolved;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Input {
    pub role: &'static str,
    pub path: PathBuf,
    pub sha256: String,
}

impl Input {
    pub fn hash(role: &'static str, path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::usage(format!("{role} {}: {e}", path.display())))?;
        let digest = Sha256::digest(&bytes);
        let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self { role, path: path.to_path_buf(), sha256 })
    }
}

#[derive(Debug, Default, Serialize)]
pub struct Timings {
    /// `(stage, seconds)` in execution order.
    pub stages: Vec<(String, f64)>,
    /// Per pyramid level, coarse to fine.
    pub level_seconds: Vec<f64>,
    pub total_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: &'static str,
    pub version: &'static str,
    /// Merged flags, config file and defaults.
    pub config: Resolved,
    pub seed: u64,
    pub codec: String,
    /// The engine configuration the run used, defaults included.
    pub synthesis: Option<SynthesisConfig>,
    pub inputs: Vec<Input>,
    /// Threads used; results do not depend on it.
    pub threads: usize,
    pub levels: Vec<(usize, usize)>,
    pub visits: usize,
    pub timings: Timings,
    pub events: serde_json::Value,
}

impl Manifest {
    pub fn new(command: &'static str, config: Resolved) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: config.seed,
            config,
            codec: String::new(),
            synthesis: None,
            inputs: Vec::new(),
            threads: 0,
            levels: Vec::new(),
            visits: 0,
            timings: Timings::default(),
            events: serde_json::Value::Null,
        }
    }

    pub fn stage(&mut self, name: &str, since: Instant) {
        self.timings.stages.push((name.to_string(), since.elapsed().as_secs_f64()));
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Runtime(format!("manifest: {e}")))?;
        std::fs::write(path, text + "\n").map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
    }
}
