//! Graph transformer autoencoder: forward pass and exact reverse-mode
//! gradients.
//!
//! Each layer maps node states `h` (N×d_in) to N×d_out:
//!
//! ```text
//! q_i = W_Q h_i + b_Q      k_j = W_K h_j + b_K      v_j = W_V h_j + b_V
//! α_ij = softmax_{j ∈ N(i)} (q_i · k_j / √d_in)
//! h'_i = act(W h_i + Σ_j α_ij v_j)
//! ```
//!
//! `act` is ReLU everywhere except the last decoder layer, which is linear.

use super::knn::Adjacency;
use super::PatientGraph;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const HIDDEN_DIM: usize = 78;
pub const LATENT_DIM: usize = 36;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub w_q: Mat,
    pub b_q: Vec<f64>,
    pub w_k: Mat,
    pub b_k: Vec<f64>,
    pub w_v: Mat,
    pub b_v: Vec<f64>,
    /// Node self-update weight.
    pub w: Mat,
    pub activation: Activation,
}

impl LayerParams {
    fn zeros(d_in: usize, d_out: usize, activation: Activation) -> Self {
        LayerParams {
            w_q: Mat::zeros(d_out, d_in),
            b_q: vec![0.0; d_out],
            w_k: Mat::zeros(d_out, d_in),
            b_k: vec![0.0; d_out],
            w_v: Mat::zeros(d_out, d_in),
            b_v: vec![0.0; d_out],
            w: Mat::zeros(d_out, d_in),
            activation,
        }
    }

    pub fn d_in(&self) -> usize {
        self.w.cols()
    }

    pub fn d_out(&self) -> usize {
        self.w.rows()
    }

    fn tensors(&self) -> [&[f64]; 7] {
        [
            self.w_q.as_slice(),
            &self.b_q,
            self.w_k.as_slice(),
            &self.b_k,
            self.w_v.as_slice(),
            &self.b_v,
            self.w.as_slice(),
        ]
    }

    fn tensors_mut(&mut self) -> [&mut [f64]; 7] {
        [
            self.w_q.as_mut_slice(),
            &mut self.b_q,
            self.w_k.as_mut_slice(),
            &mut self.b_k,
            self.w_v.as_mut_slice(),
            &mut self.b_v,
            self.w.as_mut_slice(),
        ]
    }
}

/// Autoencoder parameters. `dims` is the mirrored width list, e.g.
/// `[F, 78, 36, 78, F]`; the encoder is the first half of the layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GTParams {
    pub dims: Vec<usize>,
    pub layers: Vec<LayerParams>,
}

/// Default width list for `input` features.
pub fn default_dims(input: usize) -> Vec<usize> {
    vec![input, HIDDEN_DIM, LATENT_DIM, HIDDEN_DIM, input]
}

impl GTParams {
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 3 || dims.len().is_multiple_of(2) {
            return Err(Error::Shape(format!("width list {dims:?} must have an odd length of at least 3")));
        }
        if dims.contains(&0) {
            return Err(Error::Shape("layer widths must be positive".into()));
        }
        if dims.iter().ne(dims.iter().rev()) {
            return Err(Error::Shape(format!("width list {dims:?} is not mirrored")));
        }
        let count = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let act = if l + 1 == count { Activation::Linear } else { Activation::Relu };
                LayerParams::zeros(w[0], w[1], act)
            })
            .collect();
        Ok(GTParams { dims: dims.to_vec(), layers })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(dims: &[usize], seed: u64) -> Result<Self> {
        let mut params = GTParams::zeros(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut params.layers {
            let s = (6.0 / (layer.d_in() + layer.d_out()) as f64).sqrt();
            for m in [&mut layer.w_q, &mut layer.w_k, &mut layer.w_v, &mut layer.w] {
                for x in m.as_mut_slice() {
                    *x = rng.random_range(-s..=s);
                }
            }
        }
        Ok(params)
    }

    pub fn zeros_like(&self) -> Self {
        GTParams::zeros(&self.dims).expect("shape already validated")
    }

    pub fn encoder_depth(&self) -> usize {
        self.layers.len() / 2
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn latent_dim(&self) -> usize {
        self.dims[self.dims.len() / 2]
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.tensors()).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect()
    }

    pub fn tensor_lens(&self) -> Vec<usize> {
        self.tensors().iter().map(|t| t.len()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// Activations kept from the forward pass of one layer.
#[derive(Debug, Clone)]
pub struct LayerCache {
    input: Mat,
    q: Mat,
    k: Mat,
    v: Mat,
    /// `alpha[i][n]` is the weight of `neighbors(i)[n]`.
    alpha: Vec<Vec<f64>>,
    pre: Mat,
}

impl LayerCache {
    pub fn attention(&self) -> &[Vec<f64>] {
        &self.alpha
    }
}

#[derive(Debug, Clone)]
pub struct Forward {
    pub latent: Mat,
    pub reconstruction: Mat,
    pub caches: Vec<LayerCache>,
}

fn affine(h: &Mat, w: &Mat, b: &[f64]) -> Mat {
    let mut out = h.matmul_t(w);
    out.add_row_vector(b);
    out
}

fn layer_forward(adj: &Adjacency, h: &Mat, layer: &LayerParams) -> (Mat, LayerCache) {
    let q = affine(h, &layer.w_q, &layer.b_q);
    let k = affine(h, &layer.w_k, &layer.b_k);
    let v = affine(h, &layer.w_v, &layer.b_v);
    let mut pre = h.matmul_t(&layer.w);
    let scale = 1.0 / (layer.d_in() as f64).sqrt();
    let mut alpha = Vec::with_capacity(h.rows());
    for i in 0..h.rows() {
        let nbrs = adj.neighbors(i);
        let mut a: Vec<f64> = nbrs.iter().map(|&j| dot(q.row(i), k.row(j)) * scale).collect();
        let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for s in &mut a {
            *s = (*s - max).exp();
            total += *s;
        }
        for s in &mut a {
            *s /= total;
        }
        let row = pre.row_mut(i);
        for (&j, &w) in nbrs.iter().zip(&a) {
            axpy(w, v.row(j), row);
        }
        alpha.push(a);
    }
    let mut out = pre.clone();
    if layer.activation == Activation::Relu {
        for x in out.as_mut_slice() {
            *x = x.max(0.0);
        }
    }
    (out, LayerCache { input: h.clone(), q, k, v, alpha, pre })
}

/// Returns the layer's parameter gradients and the gradient w.r.t. its input.
fn layer_backward(adj: &Adjacency, layer: &LayerParams, cache: &LayerCache, d_out: &Mat) -> (LayerParams, Mat) {
    let n = d_out.rows();
    let d_in = layer.d_in();
    let mut dz = d_out.clone();
    if layer.activation == Activation::Relu {
        for (g, &z) in dz.as_mut_slice().iter_mut().zip(cache.pre.as_slice()) {
            if z <= 0.0 {
                *g = 0.0;
            }
        }
    }
    let scale = 1.0 / (d_in as f64).sqrt();
    let mut dq = Mat::zeros(n, layer.d_out());
    let mut dk = Mat::zeros(n, layer.d_out());
    let mut dv = Mat::zeros(n, layer.d_out());
    for i in 0..n {
        let nbrs = adj.neighbors(i);
        let alpha = &cache.alpha[i];
        let g = dz.row(i);
        let d_alpha: Vec<f64> = nbrs.iter().map(|&j| dot(g, cache.v.row(j))).collect();
        let mean: f64 = alpha.iter().zip(&d_alpha).map(|(a, d)| a * d).sum();
        for ((&j, &a), &da) in nbrs.iter().zip(alpha).zip(&d_alpha) {
            axpy(a, g, dv.row_mut(j));
            let ds = a * (da - mean) * scale;
            if ds != 0.0 {
                axpy(ds, cache.k.row(j), dq.row_mut(i));
                axpy(ds, cache.q.row(i), dk.row_mut(j));
            }
        }
    }
    let h = &cache.input;
    let grads = LayerParams {
        w_q: dq.t_matmul(h),
        b_q: dq.col_sums(),
        w_k: dk.t_matmul(h),
        b_k: dk.col_sums(),
        w_v: dv.t_matmul(h),
        b_v: dv.col_sums(),
        w: dz.t_matmul(h),
        activation: layer.activation,
    };
    let mut dh = dz.matmul(&layer.w);
    dh.add_assign(&dq.matmul(&layer.w_q));
    dh.add_assign(&dk.matmul(&layer.w_k));
    dh.add_assign(&dv.matmul(&layer.w_v));
    (grads, dh)
}

fn check_input(adj: &Adjacency, x: &Mat, params: &GTParams) -> Result<()> {
    if x.cols() != params.input_dim() {
        return Err(Error::Shape(format!("input has {} columns, model expects {}", x.cols(), params.input_dim())));
    }
    if x.rows() != adj.len() {
        return Err(Error::Shape(format!("{} feature rows for {} nodes", x.rows(), adj.len())));
    }
    Ok(())
}

fn run_layers(adj: &Adjacency, x: &Mat, layers: &[LayerParams]) -> Result<(Mat, Vec<LayerCache>)> {
    let mut h = x.clone();
    let mut caches = Vec::with_capacity(layers.len());
    for (l, layer) in layers.iter().enumerate() {
        let (out, cache) = layer_forward(adj, &h, layer);
        if !out.is_finite() {
            return Err(Error::NonFinite(format!("activations of layer {l}")));
        }
        caches.push(cache);
        h = out;
    }
    Ok((h, caches))
}

/// Full autoencoder pass over node features `x`.
pub fn forward(adj: &Adjacency, x: &Mat, params: &GTParams) -> Result<Forward> {
    check_input(adj, x, params)?;
    let depth = params.encoder_depth();
    let (latent, mut caches) = run_layers(adj, x, &params.layers[..depth])?;
    let (reconstruction, dec) = run_layers(adj, &latent, &params.layers[depth..])?;
    caches.extend(dec);
    Ok(Forward { latent, reconstruction, caches })
}

pub fn gt_forward(graph: &PatientGraph, params: &GTParams) -> Result<Forward> {
    forward(&graph.adjacency, &graph.features, params)
}

/// Encoder-only pass: the latent matrix plus caches for `encoder_backward`.
pub fn encode(adj: &Adjacency, x: &Mat, params: &GTParams) -> Result<(Mat, Vec<LayerCache>)> {
    check_input(adj, x, params)?;
    run_layers(adj, x, &params.layers[..params.encoder_depth()])
}

/// Back-propagates `d_latent` through the encoder to the node features.
pub fn encoder_backward(adj: &Adjacency, params: &GTParams, caches: &[LayerCache], d_latent: &Mat) -> Mat {
    let mut d = d_latent.clone();
    for (layer, cache) in params.layers[..params.encoder_depth()].iter().zip(caches).rev() {
        d = layer_backward(adj, layer, cache, &d).1;
    }
    d
}

/// Gradients of a scalar w.r.t. all parameters and the input, given the
/// gradient w.r.t. the reconstruction.
pub fn backward(adj: &Adjacency, params: &GTParams, fwd: &Forward, d_reconstruction: &Mat) -> (GTParams, Mat) {
    let mut grads = Vec::with_capacity(params.layers.len());
    let mut d = d_reconstruction.clone();
    for (layer, cache) in params.layers.iter().zip(&fwd.caches).rev() {
        let (g, dh) = layer_backward(adj, layer, cache, &d);
        grads.push(g);
        d = dh;
    }
    grads.reverse();
    (GTParams { dims: params.dims.clone(), layers: grads }, d)
}

/// Mean over masked rows and all columns of the squared reconstruction error.
pub fn masked_mse(x: &Mat, reconstruction: &Mat, mask: &[usize]) -> f64 {
    let mut total = 0.0;
    for &i in mask {
        total += x.row(i).iter().zip(reconstruction.row(i)).map(|(a, b)| (b - a) * (b - a)).sum::<f64>();
    }
    total / (mask.len() * x.cols()) as f64
}

pub fn loss_and_grads(adj: &Adjacency, x: &Mat, params: &GTParams, mask: &[usize]) -> Result<(f64, GTParams)> {
    if mask.is_empty() {
        return Err(Error::DegenerateInput("empty training mask".into()));
    }
    if let Some(&bad) = mask.iter().find(|&&i| i >= x.rows()) {
        return Err(Error::Shape(format!("mask index {bad} outside {} nodes", x.rows())));
    }
    let fwd = forward(adj, x, params)?;
    let mse = masked_mse(x, &fwd.reconstruction, mask);
    if !mse.is_finite() {
        return Err(Error::NonFinite("reconstruction loss".into()));
    }
    let scale = 2.0 / (mask.len() * x.cols()) as f64;
    let mut d = Mat::zeros(x.rows(), x.cols());
    for &i in mask {
        let (xr, rr) = (x.row(i), fwd.reconstruction.row(i));
        for (o, (a, b)) in d.row_mut(i).iter_mut().zip(xr.iter().zip(rr)) {
            // `+=` keeps duplicated mask entries consistent with the mean above.
            *o += scale * (b - a);
        }
    }
    let (grads, _) = backward(adj, params, &fwd, &d);
    Ok((mse, grads))
}

pub fn gt_loss_and_grads(graph: &PatientGraph, params: &GTParams, mask: &[usize]) -> Result<(f64, GTParams)> {
    loss_and_grads(&graph.adjacency, &graph.features, params, mask)
}
