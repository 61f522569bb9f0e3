//! JSON checkpoints. Floats are written with round-trip precision, so a
//! loaded checkpoint reproduces the latent embedding bit for bit.

use super::model::GTParams;
use super::train::{EpochLoss, Split, TrainConfig, TrainState};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CHECKPOINT_FORMAT: &str = "cohortflow-gt-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub config: TrainConfig,
    pub split: Split,
    pub initial_train_mse: f64,
    pub history: Vec<EpochLoss>,
    pub params: GTParams,
}

impl Checkpoint {
    pub fn from_state(state: &TrainState) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            seed: state.seed,
            config: state.config.clone(),
            split: state.split.clone(),
            initial_train_mse: state.initial_train_mse,
            history: state.history.clone(),
            params: state.params.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    fn check(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", self.version)));
        }
        let expected = GTParams::zeros(&self.params.dims).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if expected.layers.len() != self.params.layers.len() {
            return Err(Error::Checkpoint("layer count does not match dims".into()));
        }
        for (l, (a, b)) in expected.layers.iter().zip(&self.params.layers).enumerate() {
            let shapes = |p: &super::LayerParams| {
                [p.w_q.shape(), p.w_k.shape(), p.w_v.shape(), p.w.shape(), (p.b_q.len(), p.b_k.len()), (p.b_v.len(), 0)]
            };
            if shapes(a) != shapes(b) || a.activation != b.activation {
                return Err(Error::Checkpoint(format!("layer {l} does not match dims")));
            }
        }
        if !self.params.is_finite() {
            return Err(Error::Checkpoint("non-finite parameters".into()));
        }
        Ok(())
    }
}

pub fn parse_checkpoint(text: &str) -> Result<Checkpoint> {
    let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    ck.check()?;
    Ok(ck)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    parse_checkpoint(&std::fs::read_to_string(path)?)
}

pub fn save_checkpoint(state: &TrainState, path: &Path) -> Result<()> {
    std::fs::write(path, Checkpoint::from_state(state).to_json())?;
    Ok(())
}
