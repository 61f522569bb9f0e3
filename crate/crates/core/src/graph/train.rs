use super::model::{default_dims, encode, loss_and_grads, masked_mse, forward, GTParams};
use super::PatientGraph;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::optim::{AdamConfig, AdamState};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub hidden: usize,
    pub latent: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 300, batch_size: 512, lr: 1e-5, hidden: super::HIDDEN_DIM, latent: super::LATENT_DIM }
    }
}

impl TrainConfig {
    pub fn dims(&self, input: usize) -> Vec<usize> {
        let mut d = default_dims(input);
        d[1] = self.hidden;
        d[2] = self.latent;
        d[3] = self.hidden;
        d
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.hidden == 0 || self.latent == 0 {
            return Err(Error::InvalidConfig("batch size and layer widths must be positive".into()));
        }
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(Error::InvalidConfig(format!("learning rate {} must be finite and non-negative", self.lr)));
        }
        Ok(())
    }
}

/// Node masks. Train/val/test is 8:1:1 by a seeded shuffle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Validation gets `max(1, round(n/10))` nodes, test `round(n/10)`, training
/// the rest. Each mask is sorted.
pub fn split_nodes(n: usize, rng: &mut ChaCha8Rng) -> Result<Split> {
    if n < 2 {
        return Err(Error::DegenerateInput(format!("cannot split {n} nodes")));
    }
    let tenth = (n as f64 / 10.0).round() as usize;
    let val = tenth.max(1);
    let test = tenth.min(n - 1 - val);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut val_ids = order[..val].to_vec();
    let mut test_ids = order[val..val + test].to_vec();
    let mut train_ids = order[val + test..].to_vec();
    val_ids.sort_unstable();
    test_ids.sort_unstable();
    train_ids.sort_unstable();
    Ok(Split { train: train_ids, val: val_ids, test: test_ids })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub params: GTParams,
    pub adam: AdamState,
    pub seed: u64,
    pub config: TrainConfig,
    pub split: Split,
    /// Training-mask MSE of the initial parameters.
    pub initial_train_mse: f64,
    pub history: Vec<EpochLoss>,
}

impl TrainState {
    pub fn final_train_mse(&self) -> f64 {
        self.history.last().map_or(self.initial_train_mse, |e| e.train_mse)
    }
}

fn diverged(epoch: usize, e: Error) -> Error {
    match e {
        Error::NonFinite(_) => Error::Divergence { epoch, loss: f64::NAN },
        other => other,
    }
}

/// Seeded minibatch Adam on the masked reconstruction loss. Message passing
/// always runs over the whole graph.
pub fn train_autoencoder(graph: &PatientGraph, config: &TrainConfig, seed: u64) -> Result<TrainState> {
    config.validate()?;
    let x = &graph.features;
    let adj = &graph.adjacency;
    let mut params = GTParams::init(&config.dims(x.cols()), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let split = split_nodes(graph.len(), &mut rng)?;
    let adam_config = AdamConfig::with_lr(config.lr);
    let mut adam = AdamState::new(params.tensor_lens());

    let initial = forward(adj, x, &params).map_err(|e| diverged(0, e))?;
    let initial_train_mse = masked_mse(x, &initial.reconstruction, &split.train);
    if !initial_train_mse.is_finite() {
        return Err(Error::Divergence { epoch: 0, loss: initial_train_mse });
    }

    let mut history = Vec::with_capacity(config.epochs);
    let mut order = split.train.clone();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let (loss, grads) = loss_and_grads(adj, x, &params, batch).map_err(|e| diverged(epoch, e))?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            adam.update(&adam_config, params.tensors_mut(), grads.tensors());
        }
        let fwd = forward(adj, x, &params).map_err(|e| diverged(epoch, e))?;
        let train_mse = masked_mse(x, &fwd.reconstruction, &split.train);
        let val_mse = masked_mse(x, &fwd.reconstruction, &split.val);
        if !train_mse.is_finite() || !val_mse.is_finite() {
            return Err(Error::Divergence { epoch, loss: train_mse });
        }
        history.push(EpochLoss { epoch, train_mse, val_mse });
    }
    Ok(TrainState { params, adam, seed, config: config.clone(), split, initial_train_mse, history })
}

/// Encoder output for every node.
pub fn latent_embed(params: &GTParams, graph: &PatientGraph) -> Result<Mat> {
    Ok(encode(&graph.adjacency, &graph.features, params)?.0)
}

/// `epoch,train_mse,val_mse`, preceded by `#` header lines.
pub fn write_training_log(state: &TrainState, header: &[String], mut out: impl Write) -> Result<()> {
    for line in header {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "epoch,train_mse,val_mse")?;
    writeln!(out, "0,{},", state.initial_train_mse)?;
    for e in &state.history {
        writeln!(out, "{},{},{}", e.epoch, e.train_mse, e.val_mse)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = split_nodes(147, &mut rng).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (117, 15, 15));
        let s = split_nodes(2, &mut rng).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (1, 1, 0));
        let s = split_nodes(10, &mut rng).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (8, 1, 1));
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(split_nodes(1, &mut rng).is_err());
    }
}
