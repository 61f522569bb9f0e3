use crate::data::{encode_sequence, BaselineValue, Cohort, FeatureKind, SeverityCoding};
use crate::linalg::Mat;
use serde::{Deserialize, Serialize};

/// One input column that carries a baseline value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineColumn {
    /// Index into `Cohort::features`.
    pub feature: usize,
    /// Set for one-hot columns of a categorical feature.
    pub level: Option<usize>,
    /// Display name, `feature` or `feature=level`.
    pub name: String,
}

/// Records which node-feature columns are baselines and which are days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub baseline: Vec<BaselineColumn>,
    /// First column of the coded sequence block; it spans `horizon + 1` columns.
    pub sequence_start: usize,
    pub width: usize,
}

impl FeatureLayout {
    pub fn baseline_width(&self) -> usize {
        self.baseline.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures {
    pub matrix: Mat,
    pub layout: FeatureLayout,
}

impl NodeFeatures {
    /// Copy of the baseline block, used for neighbor search.
    pub fn baseline_block(&self) -> Mat {
        let b = self.layout.baseline_width();
        let mut out = Mat::zeros(self.matrix.rows(), b);
        for i in 0..self.matrix.rows() {
            out.row_mut(i).copy_from_slice(&self.matrix.row(i)[..b]);
        }
        out
    }
}

/// Row i = z-scored numeric baselines, one-hot categorical baselines, then
/// the severity-coded sequence divided by the largest absolute code.
pub fn build_node_features(cohort: &Cohort, coding: &SeverityCoding) -> NodeFeatures {
    let mut baseline = Vec::new();
    let mut stats = Vec::new();
    for (f, spec) in cohort.features.iter().enumerate() {
        match &spec.kind {
            FeatureKind::Numeric { .. } => {
                let xs = cohort.numeric_column(f);
                let n = xs.len().max(1) as f64;
                let mean = xs.iter().sum::<f64>() / n;
                let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                stats.push(Some((mean, var.sqrt())));
                baseline.push(BaselineColumn { feature: f, level: None, name: spec.name.clone() });
            }
            FeatureKind::Categorical { levels } => {
                stats.push(None);
                for (l, level) in levels.iter().enumerate() {
                    baseline.push(BaselineColumn { feature: f, level: Some(l), name: format!("{}={level}", spec.name) });
                }
            }
        }
    }
    let sequence_start = baseline.len();
    let width = sequence_start + cohort.horizon + 1;
    let scale = 1.0 / coding.max_abs();

    let mut matrix = Mat::zeros(cohort.len(), width);
    for (i, (patient, seq)) in cohort.patients.iter().zip(&cohort.sequences).enumerate() {
        let row = matrix.row_mut(i);
        for (c, col) in baseline.iter().enumerate() {
            row[c] = match (patient.baseline[col.feature], col.level) {
                (BaselineValue::Numeric(x), None) => match stats[col.feature] {
                    Some((mean, sd)) if sd > 0.0 => (x - mean) / sd,
                    _ => 0.0,
                },
                (BaselineValue::Level(v), Some(l)) => f64::from(u8::from(v == l)),
                _ => 0.0,
            };
        }
        for (c, code) in encode_sequence(seq, coding).into_iter().enumerate() {
            row[sequence_start + c] = code * scale;
        }
    }
    NodeFeatures { matrix, layout: FeatureLayout { baseline, sequence_start, width } }
}
