//! Run manifests: everything needed to repeat a command and check its output.
//!
//! A manifest is JSON with `kind` = `schane-run-manifest`. Passing one to
//! `--config` re-runs the recorded command configuration; `metrics` holds
//! every emitted number at full precision so two runs can be compared
//! bit-for-bit.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use schane::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::pipeline::{phase, phase_seed};

pub const MANIFEST_KIND: &str = "schane-run-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub kind: String,
    pub version: u32,
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    /// Fully resolved configuration, flags and preset applied.
    pub config: RunConfig,
    /// Seed of every pipeline phase, derived from `config.seed`.
    pub seeds: BTreeMap<String, u64>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    pub metrics: BTreeMap<String, f64>,
    /// Files read (checkpoints) and written, by role.
    pub inputs: BTreeMap<String, PathBuf>,
    pub outputs: BTreeMap<String, PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            kind: MANIFEST_KIND.into(),
            version: MANIFEST_VERSION,
            tool: env!("CARGO_PKG_NAME").into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: config.clone(),
            seeds: phase::ALL
                .iter()
                .map(|&(name, p)| (name.to_string(), phase_seed(config, p)))
                .collect(),
            timings: BTreeMap::new(),
            metrics: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text)?;
        if m.kind != MANIFEST_KIND || m.version != MANIFEST_VERSION {
            return Err(Error::format(
                0,
                format!("unsupported manifest {} v{}", m.kind, m.version),
            ));
        }
        Ok(m)
    }
}
