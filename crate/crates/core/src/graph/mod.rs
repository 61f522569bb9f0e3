//! Patient similarity graph and the graph transformer autoencoder.

mod checkpoint;
mod features;
mod knn;
mod model;
mod train;

pub use checkpoint::{load_checkpoint, parse_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use features::{build_node_features, BaselineColumn, FeatureLayout, NodeFeatures};
pub use knn::{build_knn_graph, Adjacency, DEFAULT_NEIGHBORS};
pub use model::{
    backward, default_dims, encode, encoder_backward, forward, gt_forward, gt_loss_and_grads, loss_and_grads,
    masked_mse, Activation, Forward, GTParams, LayerCache, LayerParams, HIDDEN_DIM, LATENT_DIM,
};
pub use train::{latent_embed, split_nodes, train_autoencoder, write_training_log, EpochLoss, Split, TrainConfig, TrainState};

use crate::data::{Cohort, SeverityCoding};
use crate::error::Result;
use crate::linalg::Mat;

/// kNN graph over baseline columns plus the node feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientGraph {
    pub adjacency: Adjacency,
    pub features: Mat,
    pub layout: FeatureLayout,
}

impl PatientGraph {
    pub fn from_cohort(cohort: &Cohort, coding: &SeverityCoding, k: usize) -> Result<Self> {
        let nf = build_node_features(cohort, coding);
        let adjacency = build_knn_graph(&nf.baseline_block(), k)?;
        Ok(PatientGraph { adjacency, features: nf.matrix, layout: nf.layout })
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }
}
