use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Mat};
use crate::optim::{AdamConfig, AdamState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig { hidden: 32, lr: 1e-3, epochs: 500 }
    }
}

/// Two-layer classifier: `softmax(W2 · relu(W1 z + b1) + b2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Mat,
    pub b2: Vec<f64>,
    pub train_accuracy: f64,
    pub final_loss: f64,
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in v.iter_mut() {
        *x /= total;
    }
}

impl MlpModel {
    pub fn classes(&self) -> usize {
        self.w2.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    fn hidden_pre(&self, z: &[f64]) -> Vec<f64> {
        (0..self.w1.rows()).map(|h| dot(self.w1.row(h), z) + self.b1[h]).collect()
    }

    fn logits(&self, hidden: &[f64]) -> Vec<f64> {
        (0..self.w2.rows()).map(|c| dot(self.w2.row(c), hidden) + self.b2[c]).collect()
    }

    pub fn probabilities(&self, z: &[f64]) -> Vec<f64> {
        let hidden: Vec<f64> = self.hidden_pre(z).into_iter().map(|x| x.max(0.0)).collect();
        let mut p = self.logits(&hidden);
        softmax_in_place(&mut p);
        p
    }

    pub fn predict(&self, z: &[f64]) -> usize {
        let p = self.probabilities(z);
        (0..p.len()).fold(0, |best, c| if p[c] > p[best] { c } else { best })
    }

    /// `∂p_c / ∂z` for a single input row.
    pub fn probability_gradient(&self, z: &[f64], c: usize) -> Vec<f64> {
        let pre = self.hidden_pre(z);
        let hidden: Vec<f64> = pre.iter().map(|x| x.max(0.0)).collect();
        let mut p = self.logits(&hidden);
        softmax_in_place(&mut p);
        // ∂p_c/∂logit_j = p_c (δ_cj − p_j)
        let d_logits: Vec<f64> = (0..p.len()).map(|j| p[c] * (f64::from(u8::from(j == c)) - p[j])).collect();
        let mut d_hidden = vec![0.0; hidden.len()];
        for (j, &g) in d_logits.iter().enumerate() {
            axpy(g, self.w2.row(j), &mut d_hidden);
        }
        let mut dz = vec![0.0; z.len()];
        for (h, &g) in d_hidden.iter().enumerate() {
            if pre[h] > 0.0 {
                axpy(g, self.w1.row(h), &mut dz);
            }
        }
        dz
    }
}

/// Full-batch softmax cross-entropy training with Adam.
pub fn train_mlp(latents: &Mat, labels: &[usize], classes: usize, config: &MlpConfig, seed: u64) -> Result<MlpModel> {
    let n = latents.rows();
    if labels.len() != n {
        return Err(Error::LengthMismatch { expected: n, found: labels.len() });
    }
    if n == 0 || classes == 0 || config.hidden == 0 {
        return Err(Error::DegenerateInput("classifier needs samples, classes and hidden units".into()));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::InvalidK { k: classes, n: l });
    }
    if !latents.is_finite() {
        return Err(Error::NonFinite("latent matrix".into()));
    }
    let d = latents.cols();
    let h = config.hidden;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut glorot = |rows: usize, cols: usize| {
        let s = (6.0 / (rows + cols) as f64).sqrt();
        Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-s..=s)).collect())
    };
    let mut model = MlpModel {
        w1: glorot(h, d),
        b1: vec![0.0; h],
        w2: glorot(classes, h),
        b2: vec![0.0; classes],
        train_accuracy: 0.0,
        final_loss: f64::NAN,
    };
    let adam_config = AdamConfig::with_lr(config.lr);
    let mut adam = AdamState::new([h * d, h, classes * h, classes]);

    let mut loss = f64::NAN;
    for epoch in 1..=config.epochs {
        let mut pre = latents.matmul_t(&model.w1);
        pre.add_row_vector(&model.b1);
        let mut hidden = pre.clone();
        for x in hidden.as_mut_slice() {
            *x = x.max(0.0);
        }
        let mut probs = hidden.matmul_t(&model.w2);
        probs.add_row_vector(&model.b2);
        loss = 0.0;
        for i in 0..n {
            let row = probs.row_mut(i);
            softmax_in_place(row);
            loss -= row[labels[i]].ln();
            row[labels[i]] -= 1.0;
        }
        loss /= n as f64;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        // probs now holds n · ∂loss/∂logits.
        let mut d_logits = probs;
        for x in d_logits.as_mut_slice() {
            *x /= n as f64;
        }
        let dw2 = d_logits.t_matmul(&hidden);
        let db2 = d_logits.col_sums();
        let mut d_hidden = d_logits.matmul(&model.w2);
        for (g, &p) in d_hidden.as_mut_slice().iter_mut().zip(pre.as_slice()) {
            if p <= 0.0 {
                *g = 0.0;
            }
        }
        let dw1 = d_hidden.t_matmul(latents);
        let db1 = d_hidden.col_sums();
        adam.update(
            &adam_config,
            vec![model.w1.as_mut_slice(), &mut model.b1, model.w2.as_mut_slice(), &mut model.b2],
            vec![dw1.as_slice(), &db1, dw2.as_slice(), &db2],
        );
    }
    let correct = (0..n).filter(|&i| model.predict(latents.row(i)) == labels[i]).count();
    model.train_accuracy = correct as f64 / n as f64;
    model.final_loss = loss;
    Ok(model)
}
