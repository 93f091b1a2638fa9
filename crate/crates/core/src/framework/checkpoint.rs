//! Checkpoint container.
//!
//! A checkpoint is a single JSON object:
//!
//! ```text
//! {
//!   "format": "schane-checkpoint",
//!   "version": 1,
//!   "seed": <u64>,            // base seed of the training run
//!   "epoch": <usize>,         // completed epochs
//!   "params": {
//!     "layers": [{"weight": {"rows", "cols", "data"}, "bias": [..]}, ..],
//!     "head":   {"weight": {..}, "bias": [..]},
//!     "dropout_rate": <f64>
//!   },
//!   "adam": {"m": [[..]], "v": [[..]], "step", "learning_rate",
//!            "weight_decay", "beta1", "beta2", "eps"}
//! }
//! ```
//!
//! Weights are stored `input × output`, row-major. Floats are written in
//! shortest round-trip form, so save → load is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::encoder::EncoderParams;
use super::trainer::TrainState;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "schane-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub epoch: usize,
    pub params: EncoderParams,
    pub adam: AdamState,
}

impl Checkpoint {
    pub fn from_state(state: &TrainState) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            seed: state.seed,
            epoch: state.epoch,
            params: state.params.clone(),
            adam: state.adam.clone(),
        }
    }

    pub fn into_state(self) -> TrainState {
        TrainState {
            params: self.params,
            adam: self.adam,
            epoch: self.epoch,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::format(0, format!("not a checkpoint (format `{}`)", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::format(
                0,
                format!("unsupported checkpoint version {}", self.version),
            ));
        }
        self.params.validate()?;
        let tensors = self.params.tensors();
        let fits = |acc: &Vec<Vec<f64>>| {
            acc.len() == tensors.len() && acc.iter().zip(&tensors).all(|(a, t)| a.len() == t.len())
        };
        if !fits(&self.adam.m) || !fits(&self.adam.v) {
            return Err(Error::Shape("optimizer moments do not match parameters".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Self = serde_json::from_str(&text)?;
        ckpt.validate()?;
        Ok(ckpt)
    }
}
