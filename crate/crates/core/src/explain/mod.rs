//! Cluster explanations: a small classifier on latent embeddings and
//! gradient-times-input importance of baseline features.

mod mlp;

pub use mlp::{train_mlp, MlpConfig, MlpModel};

use crate::clustering::ClusterAssignment;
use crate::error::{Error, Result};
use crate::graph::{encode, encoder_backward, GTParams, LayerCache, PatientGraph};
use crate::linalg::Mat;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Patient-level importance of each baseline column for one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub patient: usize,
    pub cluster: usize,
    /// `∂p_c / ∂b_r` for each baseline column.
    pub gradient: Vec<f64>,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterImportance {
    pub cluster: usize,
    pub scores: Vec<f64>,
}

/// Encoder, classifier and graph needed to attribute cluster membership.
#[derive(Debug, Clone)]
pub struct ExplainPipeline {
    pub graph: PatientGraph,
    pub params: Option<GTParams>,
    pub mlp: Option<MlpModel>,
}

/// Forward state shared across patients.
struct Prepared<'a> {
    params: &'a GTParams,
    mlp: &'a MlpModel,
    latent: Mat,
    caches: Vec<LayerCache>,
}

impl ExplainPipeline {
    fn prepare(&self) -> Result<Prepared<'_>> {
        let params = self.params.as_ref().ok_or_else(|| Error::UntrainedPipeline("no autoencoder parameters".into()))?;
        let mlp = self.mlp.as_ref().ok_or_else(|| Error::UntrainedPipeline("no cluster classifier".into()))?;
        if mlp.input_dim() != params.latent_dim() {
            return Err(Error::Shape(format!("classifier takes {} inputs, latent has {}", mlp.input_dim(), params.latent_dim())));
        }
        let (latent, caches) = encode(&self.graph.adjacency, &self.graph.features, params)?;
        Ok(Prepared { params, mlp, latent, caches })
    }

    fn importance_with(&self, prep: &Prepared<'_>, patient: usize, cluster: usize) -> Result<ImportanceVector> {
        if patient >= self.graph.len() {
            return Err(Error::Shape(format!("patient index {patient} outside {} nodes", self.graph.len())));
        }
        if cluster >= prep.mlp.classes() {
            return Err(Error::InvalidK { k: prep.mlp.classes(), n: cluster });
        }
        let dz = prep.mlp.probability_gradient(prep.latent.row(patient), cluster);
        let mut d_latent = Mat::zeros(prep.latent.rows(), prep.latent.cols());
        d_latent.row_mut(patient).copy_from_slice(&dz);
        let dx = encoder_backward(&self.graph.adjacency, prep.params, &prep.caches, &d_latent);
        let b = self.graph.layout.baseline_width();
        let gradient = dx.row(patient)[..b].to_vec();
        let values = &self.graph.features.row(patient)[..b];
        let scores = gradient.iter().zip(values).map(|(g, v)| (g * v).max(0.0)).collect();
        Ok(ImportanceVector { patient, cluster, gradient, scores })
    }

    /// Importance of patient `patient`'s baseline columns for the softmax
    /// probability of `cluster`. Other patients' features are held fixed.
    pub fn patient_importance(&self, patient: usize, cluster: usize) -> Result<ImportanceVector> {
        self.importance_with(&self.prepare()?, patient, cluster)
    }

    /// Patient scores of every member of `cluster`, each for that cluster.
    pub fn member_importances(&self, assignment: &ClusterAssignment, cluster: usize) -> Result<Vec<ImportanceVector>> {
        let prep = self.prepare()?;
        assignment.members(cluster).into_iter().map(|i| self.importance_with(&prep, i, cluster)).collect()
    }

    /// One aggregated row per cluster.
    pub fn heatmap(&self, assignment: &ClusterAssignment) -> Result<Vec<ClusterImportance>> {
        if assignment.labels.len() != self.graph.len() {
            return Err(Error::LengthMismatch { expected: self.graph.len(), found: assignment.labels.len() });
        }
        let prep = self.prepare()?;
        (0..assignment.k)
            .map(|c| {
                let members: Result<Vec<_>> =
                    assignment.members(c).into_iter().map(|i| self.importance_with(&prep, i, c)).collect();
                cluster_importance(c, &members?, self.graph.len())
            })
            .collect()
    }
}

pub fn patient_importance(pipeline: &ExplainPipeline, patient: usize, cluster: usize) -> Result<ImportanceVector> {
    pipeline.patient_importance(patient, cluster)
}

/// `2 · softmax_r(mean_i score_ir / cohort_size) − 1`, softmax across
/// features.
pub fn cluster_importance(cluster: usize, importances: &[ImportanceVector], cohort_size: usize) -> Result<ClusterImportance> {
    let first = importances.first().ok_or(Error::EmptyCluster(cluster))?;
    let r = first.scores.len();
    if let Some(bad) = importances.iter().find(|v| v.scores.len() != r) {
        return Err(Error::LengthMismatch { expected: r, found: bad.scores.len() });
    }
    let mut mean = vec![0.0; r];
    for v in importances {
        for (m, s) in mean.iter_mut().zip(&v.scores) {
            *m += s;
        }
    }
    let denom = importances.len() as f64 * cohort_size.max(1) as f64;
    let logits: Vec<f64> = mean.iter().map(|m| m / denom).collect();
    Ok(ClusterImportance { cluster, scores: normalize_scores(&logits) })
}

/// `2 · softmax(x) − 1`.
pub fn normalize_scores(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.iter().map(|v| 2.0 * v / total - 1.0).collect()
}

/// Rows are clusters, columns baseline features.
pub fn write_heatmap_csv(
    feature_names: &[String],
    cluster_names: &[String],
    rows: &[ClusterImportance],
    header: &[String],
    mut out: impl Write,
) -> Result<()> {
    for line in header {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["cluster".to_string()];
    head.extend(feature_names.iter().cloned());
    w.write_record(&head)?;
    for row in rows {
        let name = cluster_names.get(row.cluster).cloned().unwrap_or_else(|| row.cluster.to_string());
        let mut rec = vec![name];
        rec.extend(row.scores.iter().map(|s| s.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(scores: Vec<f64>) -> ImportanceVector {
        ImportanceVector { patient: 0, cluster: 0, gradient: vec![0.0; scores.len()], scores }
    }

    #[test]
    fn uniform_scores_map_to_two_over_r_minus_one() {
        let c = cluster_importance(0, &[iv(vec![0.3; 4]), iv(vec![0.3; 4])], 10).unwrap();
        for s in &c.scores {
            assert!((s - (2.0 / 4.0 - 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn dominant_feature_saturates() {
        let c = cluster_importance(0, &[iv(vec![5000.0, 0.0, 0.0])], 1).unwrap();
        assert!(c.scores[0] > 1.0 - 1e-12);
        assert!(c.scores[1] < -1.0 + 1e-12);
    }

    #[test]
    fn empty_cluster_is_an_error() {
        assert!(matches!(cluster_importance(3, &[], 5), Err(Error::EmptyCluster(3))));
    }
}
