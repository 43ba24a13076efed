//! Embedded topic model core.
//!
//! Topics live in the word-embedding space: topic `k` has an embedding
//! `alpha_k`, and its distribution over a vocabulary with embedding matrix
//! `rho` is `softmax(rho . alpha_k)`. The same map applied to the reference
//! vocabulary's embeddings gives the reference projection, which is how
//! topics are compared against reference distributions defined over a
//! different lexicon.
//!
//! Documents are encoded into a logistic-normal posterior: a one-hidden-layer
//! softplus network yields `(mu, log_var)`, a reparameterized draw gives the
//! logit `delta`, and `theta = softmax(delta)`.

use ndarray::{Array1, Array2, ArrayView1};

use crate::corpus::BowDocument;
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Floor inside the reconstruction log.
pub const LOG_EPS: f64 = 1e-12;

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

pub fn softmax_in_place(x: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in x.iter_mut() {
        *v /= sum;
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `K x V` topic-word distributions; each row is on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicWordDist {
    pub beta: Array2<f64>,
}

impl TopicWordDist {
    pub fn num_topics(&self) -> usize {
        self.beta.nrows()
    }

    pub fn vocab_size(&self) -> usize {
        self.beta.ncols()
    }

    pub fn row(&self, k: usize) -> ArrayView1<'_, f64> {
        self.beta.row(k)
    }
}

/// Row `k` = `softmax(embeddings . alpha_k)`.
fn topic_softmax(alpha: &Array2<f64>, embeddings: &EmbeddingMatrix) -> Result<Array2<f64>> {
    if alpha.ncols() != embeddings.dim() {
        return Err(Error::DimMismatch(format!(
            "topic embeddings have dimension {} but word embeddings have {}",
            alpha.ncols(),
            embeddings.dim()
        )));
    }
    let mut logits = alpha.dot(&embeddings.matrix.t());
    for mut row in logits.rows_mut() {
        softmax_in_place(row.as_slice_mut().expect("standard layout"));
    }
    Ok(logits)
}

pub fn compute_beta(alpha: &Array2<f64>, rho: &EmbeddingMatrix) -> Result<TopicWordDist> {
    Ok(TopicWordDist {
        beta: topic_softmax(alpha, rho)?,
    })
}

/// Model topics re-expressed over the reference vocabulary.
pub fn project_reference(alpha: &Array2<f64>, rho_ref: &EmbeddingMatrix) -> Result<Array2<f64>> {
    topic_softmax(alpha, rho_ref)
}

/// Inference network weights. The hidden layer maps the normalized
/// bag-of-words to `hidden` softplus units; two linear heads produce the
/// posterior mean and log-variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    /// `H x V`
    pub w_hidden: Array2<f64>,
    pub b_hidden: Array1<f64>,
    /// `K x H`
    pub w_mu: Array2<f64>,
    pub b_mu: Array1<f64>,
    /// `K x H`
    pub w_log_var: Array2<f64>,
    pub b_log_var: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// `K x L` topic embeddings.
    pub alpha: Array2<f64>,
    pub encoder: Encoder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub topics: usize,
    pub vocab: usize,
    pub embedding: usize,
    pub hidden: usize,
}

impl ModelParams {
    pub fn zeros(dims: ModelDims) -> Self {
        let ModelDims {
            topics: k,
            vocab: v,
            embedding: l,
            hidden: h,
        } = dims;
        ModelParams {
            alpha: Array2::zeros((k, l)),
            encoder: Encoder {
                w_hidden: Array2::zeros((h, v)),
                b_hidden: Array1::zeros(h),
                w_mu: Array2::zeros((k, h)),
                b_mu: Array1::zeros(k),
                w_log_var: Array2::zeros((k, h)),
                b_log_var: Array1::zeros(k),
            },
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            topics: self.alpha.nrows(),
            vocab: self.encoder.w_hidden.ncols(),
            embedding: self.alpha.ncols(),
            hidden: self.encoder.w_hidden.nrows(),
        }
    }

    /// Parameter tensors in checkpoint order: alpha, hidden weights, hidden
    /// bias, mean head weights, mean head bias, log-variance head weights,
    /// log-variance head bias.
    pub fn tensors(&self) -> [&[f64]; 7] {
        let e = &self.encoder;
        [
            self.alpha.as_slice().expect("standard layout"),
            e.w_hidden.as_slice().expect("standard layout"),
            e.b_hidden.as_slice().expect("standard layout"),
            e.w_mu.as_slice().expect("standard layout"),
            e.b_mu.as_slice().expect("standard layout"),
            e.w_log_var.as_slice().expect("standard layout"),
            e.b_log_var.as_slice().expect("standard layout"),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 7] {
        let e = &mut self.encoder;
        [
            self.alpha.as_slice_mut().expect("standard layout"),
            e.w_hidden.as_slice_mut().expect("standard layout"),
            e.b_hidden.as_slice_mut().expect("standard layout"),
            e.w_mu.as_slice_mut().expect("standard layout"),
            e.b_mu.as_slice_mut().expect("standard layout"),
            e.w_log_var.as_slice_mut().expect("standard layout"),
            e.b_log_var.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Flat coordinate `i` across all tensors in checkpoint order.
    pub fn get(&self, mut i: usize) -> f64 {
        for t in self.tensors() {
            if i < t.len() {
                return t[i];
            }
            i -= t.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set(&mut self, mut i: usize, value: f64) {
        for t in self.tensors_mut() {
            if i < t.len() {
                t[i] = value;
                return;
            }
            i -= t.len();
        }
        panic!("parameter index out of range");
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// Hidden activations of the encoder for one document.
#[derive(Debug, Clone)]
pub(crate) struct EncoderPass {
    pub pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub mu: Vec<f64>,
    pub log_var: Vec<f64>,
}

/// Forward pass over a sparse normalized input `(index, weight)`.
pub(crate) fn encoder_pass(input: &[(usize, f64)], params: &ModelParams) -> EncoderPass {
    let e = &params.encoder;
    let h = e.w_hidden.nrows();
    let mut pre = e.b_hidden.to_vec();
    for &(v, x) in input {
        let col = e.w_hidden.column(v);
        for j in 0..h {
            pre[j] += col[j] * x;
        }
    }
    let hidden: Vec<f64> = pre.iter().map(|&z| softplus(z)).collect();
    let head = |w: &Array2<f64>, b: &Array1<f64>| -> Vec<f64> {
        w.rows()
            .into_iter()
            .zip(b.iter())
            .map(|(row, &bias)| bias + row.iter().zip(&hidden).map(|(a, x)| a * x).sum::<f64>())
            .collect()
    };
    let mu = head(&e.w_mu, &e.b_mu);
    let log_var = head(&e.w_log_var, &e.b_log_var);
    EncoderPass {
        pre,
        hidden,
        mu,
        log_var,
    }
}

pub(crate) fn sparse_input(doc: &BowDocument) -> Vec<(usize, f64)> {
    let total = doc.total() as f64;
    doc.counts
        .iter()
        .map(|&(v, c)| (v, f64::from(c) / total))
        .collect()
}

/// Posterior `(mu, log_var)` for a dense normalized bag-of-words.
pub fn encode(x_norm: &[f64], params: &ModelParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let v = params.dims().vocab;
    if x_norm.len() != v {
        return Err(Error::DimMismatch(format!(
            "input has {} entries, encoder expects {v}",
            x_norm.len()
        )));
    }
    let input: Vec<(usize, f64)> = x_norm
        .iter()
        .enumerate()
        .filter(|(_, &x)| x != 0.0)
        .map(|(i, &x)| (i, x))
        .collect();
    let pass = encoder_pass(&input, params);
    Ok((pass.mu, pass.log_var))
}

pub fn encode_document(doc: &BowDocument, params: &ModelParams) -> (Vec<f64>, Vec<f64>) {
    let pass = encoder_pass(&sparse_input(doc), params);
    (pass.mu, pass.log_var)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub mu: Vec<f64>,
    pub log_var: Vec<f64>,
    pub delta: Vec<f64>,
    pub theta: Vec<f64>,
}

/// `delta = mu + exp(log_var / 2) * noise`, `theta = softmax(delta)`.
pub fn reparameterize(mu: &[f64], log_var: &[f64], noise: &[f64]) -> LatentState {
    let delta: Vec<f64> = mu
        .iter()
        .zip(log_var)
        .zip(noise)
        .map(|((m, lv), n)| m + (0.5 * lv).exp() * n)
        .collect();
    let theta = softmax(&delta);
    LatentState {
        mu: mu.to_vec(),
        log_var: log_var.to_vec(),
        delta,
        theta,
    }
}

/// `sum_v x_v log((theta^T beta)_v + 1e-12)`.
pub fn reconstruction_loglik(doc: &BowDocument, theta: &[f64], beta: &TopicWordDist) -> f64 {
    doc.counts
        .iter()
        .map(|&(v, c)| {
            let p: f64 = theta
                .iter()
                .zip(beta.beta.column(v))
                .map(|(t, b)| t * b)
                .sum();
            f64::from(c) * (p + LOG_EPS).ln()
        })
        .sum()
}

/// Closed-form `KL(N(mu, diag(exp(log_var))) || N(0, I))`.
pub fn kl_gaussian(mu: &[f64], log_var: &[f64]) -> f64 {
    0.5 * mu
        .iter()
        .zip(log_var)
        .map(|(m, lv)| lv.exp() + m * m - 1.0 - lv)
        .sum::<f64>()
}

/// Mean over the batch of reconstruction log-likelihood minus the Gaussian
/// KL. `noise` has one row of standard-normal draws per document.
pub fn elbo(
    batch: &[&BowDocument],
    params: &ModelParams,
    rho: &EmbeddingMatrix,
    noise: &Array2<f64>,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Config("ELBO of an empty batch".into()));
    }
    if noise.nrows() != batch.len() || noise.ncols() != params.dims().topics {
        return Err(Error::DimMismatch(format!(
            "noise is {:?}, expected ({}, {})",
            noise.dim(),
            batch.len(),
            params.dims().topics
        )));
    }
    let beta = compute_beta(&params.alpha, rho)?;
    let mut sum = 0.0;
    for (doc, eps) in batch.iter().zip(noise.rows()) {
        let (mu, log_var) = encode_document(doc, params);
        let state = reparameterize(&mu, &log_var, eps.as_slice().expect("standard layout"));
        sum += reconstruction_loglik(doc, &state.theta, &beta) - kl_gaussian(&mu, &log_var);
    }
    Ok(sum / batch.len() as f64)
}
