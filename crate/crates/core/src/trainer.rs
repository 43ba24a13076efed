//! Minibatch optimization of the regularized objective
//!
//! ```text
//! L = ELBO - w_beta * R_beta - w_theta * R_theta - w_gamma * R_gamma
//! ```
//!
//! Gradients are derived by hand (reverse mode through the encoder, the
//! reparameterization, both softmaxes and the KL terms) and checked against
//! central finite differences by [`gradient_check`].

use std::fmt::Write as _;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::etm::{
    compute_beta, encoder_pass, project_reference, sigmoid, softmax_in_place, sparse_input,
    ModelDims, ModelParams, LOG_EPS,
};
use crate::supervision::{doc_level_topics, SupervisionBundle, KL_EPS};

const MIN_RESTRICTED_MASS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Topic count; when a topic config is supplied its entry count wins and
    /// a conflicting value here is rejected.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_total: Option<usize>,
    pub gamma_beta: f64,
    pub gamma_theta: f64,
    pub gamma_gamma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub hidden_width: usize,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k_total: None,
            gamma_beta: 1.0,
            gamma_theta: 1.0,
            gamma_gamma: 1.0,
            epochs: 100,
            batch_size: 64,
            learning_rate: 0.002,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            hidden_width: 300,
            precision: Precision::F64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, w) in [
            ("gamma_beta", self.gamma_beta),
            ("gamma_theta", self.gamma_theta),
            ("gamma_gamma", self.gamma_gamma),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return bad(format!("{name} must be a finite nonnegative weight, got {w}"));
            }
        }
        if self.epochs < 1 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1".into());
        }
        if self.hidden_width < 1 {
            return bad("hidden_width must be at least 1".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be nonnegative, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must lie in [0, 1)".into());
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive".into());
        }
        if self.k_total == Some(0) {
            return bad("k_total must be at least 1".into());
        }
        if self.precision != Precision::F64 {
            return bad("only 64-bit training is supported (precision = \"f64\")".into());
        }
        Ok(())
    }

    pub fn weights(&self) -> RegWeights {
        RegWeights {
            beta: self.gamma_beta,
            theta: self.gamma_theta,
            gamma: self.gamma_gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegWeights {
    pub beta: f64,
    pub theta: f64,
    pub gamma: f64,
}

/// Objective decomposition. Omitted regularizers (zero weight or empty
/// mask) are reported as 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    pub elbo: f64,
    pub r_beta: f64,
    pub r_theta: f64,
    pub r_gamma: f64,
    pub objective: f64,
}

impl ObjectiveTerms {
    fn is_finite(&self) -> bool {
        [self.elbo, self.r_beta, self.r_theta, self.r_gamma, self.objective]
            .iter()
            .all(|x| x.is_finite())
    }
}

/// Read-only inputs shared by every objective evaluation.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveInputs<'a> {
    pub corpus: &'a Corpus,
    pub rho: &'a EmbeddingMatrix,
    pub supervision: &'a SupervisionBundle,
    pub weights: RegWeights,
}

impl ObjectiveInputs<'_> {
    fn check(&self, params: &ModelParams) -> Result<()> {
        let d = params.dims();
        if d.vocab != self.corpus.vocab_size() || self.rho.rows() != d.vocab {
            return Err(Error::DimMismatch(format!(
                "model vocabulary {} vs corpus {} vs embeddings {}",
                d.vocab,
                self.corpus.vocab_size(),
                self.rho.rows()
            )));
        }
        if self.rho.dim() != d.embedding {
            return Err(Error::DimMismatch(format!(
                "topic embeddings have dimension {}, word embeddings {}",
                d.embedding,
                self.rho.dim()
            )));
        }
        if self.supervision.num_topics() != d.topics {
            return Err(Error::DimMismatch(format!(
                "supervision covers {} topics, model has {}",
                self.supervision.num_topics(),
                d.topics
            )));
        }
        Ok(())
    }

    fn topic_level(&self) -> Option<(Vec<usize>, &crate::supervision::ReferenceTarget)> {
        let r = self.supervision.reference.as_ref()?;
        let topics: Vec<usize> = active(&self.supervision.masks, |m| m.use_topic_level);
        (self.weights.beta > 0.0 && !topics.is_empty()).then_some((topics, r))
    }

    fn word_level(&self) -> Option<(Vec<usize>, &Array2<f64>)> {
        let g = self.supervision.gamma.as_ref()?;
        let topics: Vec<usize> = active(&self.supervision.masks, |m| m.use_word_level);
        (self.weights.gamma > 0.0 && !topics.is_empty()).then_some((topics, g))
    }

    fn doc_level(&self) -> Option<(Vec<usize>, &Array2<f64>)> {
        let t = self.supervision.doc_targets.as_ref()?;
        let topics = doc_level_topics(&self.supervision.masks);
        (self.weights.theta > 0.0 && !topics.is_empty()).then_some((topics, &t.theta_t))
    }
}

fn active(
    masks: &[crate::supervision::SupervisionMask],
    f: impl Fn(&crate::supervision::SupervisionMask) -> bool,
) -> Vec<usize> {
    (0..masks.len()).filter(|&j| f(&masks[j])).collect()
}

/// Mean KL over `topics` of `target[j] || softmax(logits)[j]`, and, when
/// `grad` is given, accumulates `scale * d(mean KL)/d(dist)` into it.
fn masked_kl(
    target: &Array2<f64>,
    dist: &Array2<f64>,
    topics: &[usize],
    mut grad: Option<(&mut Array2<f64>, f64)>,
) -> f64 {
    let n = topics.len() as f64;
    let mut sum = 0.0;
    for &j in topics {
        for (v, (&p, &q)) in target.row(j).iter().zip(dist.row(j)).enumerate() {
            if p > 0.0 {
                sum += p * (p / q.max(KL_EPS)).ln();
                if let Some((g, scale)) = grad.as_mut() {
                    if q > KL_EPS {
                        g[[j, v]] -= *scale * p / q / n;
                    }
                }
            }
        }
    }
    sum / n
}

/// Backpropagates `g_dist` through `dist = row-softmax(alpha . emb^T)` into
/// `g_alpha`.
fn softmax_rows_backward(
    dist: &Array2<f64>,
    g_dist: &Array2<f64>,
    emb: &EmbeddingMatrix,
    g_alpha: &mut Array2<f64>,
) {
    let mut g_logits = Array2::zeros(dist.dim());
    for k in 0..dist.nrows() {
        let row = dist.row(k);
        let g = g_dist.row(k);
        let dot: f64 = row.iter().zip(g).map(|(a, b)| a * b).sum();
        for v in 0..dist.ncols() {
            g_logits[[k, v]] = row[v] * (g[v] - dot);
        }
    }
    *g_alpha += &g_logits.dot(&emb.matrix);
}

fn evaluate(
    inputs: &ObjectiveInputs<'_>,
    batch: &[usize],
    params: &ModelParams,
    noise: &Array2<f64>,
    want_grad: bool,
) -> Result<(ObjectiveTerms, Option<ModelParams>)> {
    inputs.check(params)?;
    let dims = params.dims();
    let k = dims.topics;
    if batch.is_empty() {
        return Err(Error::Config("objective of an empty batch".into()));
    }
    if noise.dim() != (batch.len(), k) {
        return Err(Error::DimMismatch(format!(
            "noise is {:?}, expected ({}, {k})",
            noise.dim(),
            batch.len()
        )));
    }
    let docs = inputs.corpus.documents();
    let beta = compute_beta(&params.alpha, inputs.rho)?.beta;
    let doc_level = inputs.doc_level();
    let b = batch.len() as f64;

    let mut grad = want_grad.then(|| ModelParams::zeros(dims));
    let mut g_beta = Array2::<f64>::zeros(beta.dim());
    let mut elbo_sum = 0.0;
    let mut r_theta_sum = 0.0;

    let enc = &params.encoder;
    for (i, &d) in batch.iter().enumerate() {
        let doc = docs.get(d).ok_or_else(|| {
            Error::DimMismatch(format!("document index {d} outside corpus of {}", docs.len()))
        })?;
        let input = sparse_input(doc);
        let pass = encoder_pass(&input, params);
        let eps = noise.row(i);
        let std: Vec<f64> = pass.log_var.iter().map(|lv| (0.5 * lv).exp()).collect();
        let mut theta: Vec<f64> = (0..k).map(|j| pass.mu[j] + std[j] * eps[j]).collect();
        softmax_in_place(&mut theta);

        let mix: Vec<f64> = doc
            .counts
            .iter()
            .map(|&(v, _)| (0..k).map(|j| theta[j] * beta[[j, v]]).sum::<f64>())
            .collect();
        let rec: f64 = doc
            .counts
            .iter()
            .zip(&mix)
            .map(|(&(_, c), p)| f64::from(c) * (p + LOG_EPS).ln())
            .sum();
        let klg = 0.5
            * (0..k)
                .map(|j| pass.log_var[j].exp() + pass.mu[j] * pass.mu[j] - 1.0 - pass.log_var[j])
                .sum::<f64>();
        elbo_sum += rec - klg;

        let mut restricted = Vec::new();
        if let Some((topics, theta_t)) = &doc_level {
            restricted = topics.iter().map(|&j| theta[j]).collect();
            let mass: f64 = restricted.iter().sum();
            if mass < MIN_RESTRICTED_MASS {
                return Err(Error::RenormalizationUnderflow { doc: d, mass });
            }
            for x in &mut restricted {
                *x /= mass;
            }
            let target = theta_t.row(d);
            r_theta_sum += target
                .iter()
                .zip(&restricted)
                .filter(|(&t, _)| t > 0.0)
                .map(|(&t, &q)| t * (t / q.max(KL_EPS)).ln())
                .sum::<f64>();
        }

        let Some(g) = grad.as_mut() else { continue };
        let scale = 1.0 / b;

        let mut g_theta = vec![0.0; k];
        for (&(v, c), p) in doc.counts.iter().zip(&mix) {
            let w = scale * f64::from(c) / (p + LOG_EPS);
            for j in 0..k {
                g_theta[j] += w * beta[[j, v]];
                g_beta[[j, v]] += w * theta[j];
            }
        }
        let dot: f64 = theta.iter().zip(&g_theta).map(|(a, b)| a * b).sum();
        let mut g_delta: Vec<f64> = (0..k).map(|j| theta[j] * (g_theta[j] - dot)).collect();

        if let Some((topics, theta_t)) = &doc_level {
            // restricted theta is a softmax over the restricted logits
            let w = inputs.weights.theta * scale;
            let target = theta_t.row(d);
            let g_r: Vec<f64> = target
                .iter()
                .zip(&restricted)
                .map(|(&t, &q)| if t > 0.0 && q > KL_EPS { w * t / q } else { 0.0 })
                .collect();
            let dot: f64 = restricted.iter().zip(&g_r).map(|(a, b)| a * b).sum();
            for (s, &j) in topics.iter().enumerate() {
                g_delta[j] += restricted[s] * (g_r[s] - dot);
            }
        }

        let mut g_mu = vec![0.0; k];
        let mut g_lv = vec![0.0; k];
        for j in 0..k {
            g_mu[j] = g_delta[j] - scale * pass.mu[j];
            g_lv[j] = g_delta[j] * 0.5 * std[j] * eps[j]
                - scale * 0.5 * (pass.log_var[j].exp() - 1.0);
        }

        let gh = &mut g.encoder;
        let h = pass.hidden.len();
        let mut g_hidden = vec![0.0; h];
        for j in 0..k {
            gh.b_mu[j] += g_mu[j];
            gh.b_log_var[j] += g_lv[j];
            for u in 0..h {
                gh.w_mu[[j, u]] += g_mu[j] * pass.hidden[u];
                gh.w_log_var[[j, u]] += g_lv[j] * pass.hidden[u];
                g_hidden[u] += enc.w_mu[[j, u]] * g_mu[j] + enc.w_log_var[[j, u]] * g_lv[j];
            }
        }
        for u in 0..h {
            let g_pre = g_hidden[u] * sigmoid(pass.pre[u]);
            gh.b_hidden[u] += g_pre;
            for &(v, x) in &input {
                gh.w_hidden[[u, v]] += g_pre * x;
            }
        }
    }

    let mut terms = ObjectiveTerms {
        elbo: elbo_sum / b,
        ..Default::default()
    };
    if doc_level.is_some() {
        terms.r_theta = r_theta_sum / b;
    }

    if let Some((topics, gamma)) = inputs.word_level() {
        let gw = grad.is_some().then_some((&mut g_beta, inputs.weights.gamma));
        terms.r_gamma = masked_kl(gamma, &beta, &topics, gw.map(|(g, w)| (g, -w)));
    }
    if let Some(g) = grad.as_mut() {
        softmax_rows_backward(&beta, &g_beta, inputs.rho, &mut g.alpha);
    }

    if let Some((topics, reference)) = inputs.topic_level() {
        let proj = project_reference(&params.alpha, &reference.rho_ref)?;
        if let Some(g) = grad.as_mut() {
            let mut g_proj = Array2::zeros(proj.dim());
            terms.r_beta = masked_kl(
                &reference.beta_ref,
                &proj,
                &topics,
                Some((&mut g_proj, -inputs.weights.beta)),
            );
            softmax_rows_backward(&proj, &g_proj, &reference.rho_ref, &mut g.alpha);
        } else {
            terms.r_beta = masked_kl(&reference.beta_ref, &proj, &topics, None);
        }
    }

    let w = inputs.weights;
    terms.objective = terms.elbo - w.beta * terms.r_beta - w.theta * terms.r_theta
        - w.gamma * terms.r_gamma;
    Ok((terms, grad))
}

/// Regularized objective on a batch of document indices with injected
/// per-document noise (`batch.len() x K`).
pub fn total_objective(
    inputs: &ObjectiveInputs<'_>,
    batch: &[usize],
    params: &ModelParams,
    noise: &Array2<f64>,
) -> Result<ObjectiveTerms> {
    evaluate(inputs, batch, params, noise, false).map(|(t, _)| t)
}

/// Objective and its gradient with respect to every parameter.
pub fn objective_gradient(
    inputs: &ObjectiveInputs<'_>,
    batch: &[usize],
    params: &ModelParams,
    noise: &Array2<f64>,
) -> Result<(ObjectiveTerms, ModelParams)> {
    evaluate(inputs, batch, params, noise, true).map(|(t, g)| (t, g.expect("gradient requested")))
}

/// Alpha uniform in [-0.1, 0.1]; encoder weights uniform in
/// `+-1/sqrt(fan_in)`; biases zero.
pub fn initialize_params<R: Rng>(dims: ModelDims, rng: &mut R) -> ModelParams {
    let mut p = ModelParams::zeros(dims);
    let fill = |a: &mut [f64], bound: f64, rng: &mut R| {
        for x in a {
            *x = rng.random_range(-bound..=bound);
        }
    };
    let e = &mut p.encoder;
    fill(p.alpha.as_slice_mut().unwrap(), 0.1, rng);
    fill(
        e.w_hidden.as_slice_mut().unwrap(),
        1.0 / (dims.vocab as f64).sqrt(),
        rng,
    );
    let head = 1.0 / (dims.hidden as f64).sqrt();
    fill(e.w_mu.as_slice_mut().unwrap(), head, rng);
    fill(e.w_log_var.as_slice_mut().unwrap(), head, rng);
    p
}

pub fn sample_noise<R: Rng>(rows: usize, topics: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_fn((rows, topics), |_| rng.sample(StandardNormal))
}

/// Adam on the negated objective.
#[derive(Debug, Clone)]
pub struct Adam {
    m: ModelParams,
    v: ModelParams,
    step: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(dims: ModelDims, config: &TrainConfig) -> Self {
        Adam {
            m: ModelParams::zeros(dims),
            v: ModelParams::zeros(dims),
            step: 0,
            lr: config.learning_rate,
            beta1: config.adam_beta1,
            beta2: config.adam_beta2,
            eps: config.adam_eps,
        }
    }

    /// Ascent step along `grad`, the gradient of the objective.
    pub fn step(&mut self, params: &mut ModelParams, grad: &ModelParams) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grad.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for i in 0..p.len() {
                let gi = -g[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub elbo: f64,
    pub r_beta: f64,
    pub r_theta: f64,
    pub r_gamma: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,elbo,r_beta,r_theta,r_gamma,objective\n");
        for r in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.epoch, r.elbo, r.r_beta, r.r_theta, r.r_gamma, r.objective
            );
        }
        out
    }

    pub fn first(&self) -> Option<&EpochRecord> {
        self.epochs.first()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

pub fn model_dims(inputs: &ObjectiveInputs<'_>, config: &TrainConfig) -> ModelDims {
    ModelDims {
        topics: inputs.supervision.num_topics(),
        vocab: inputs.corpus.vocab_size(),
        embedding: inputs.rho.dim(),
        hidden: config.hidden_width,
    }
}

/// Trains from a seeded initialization. The same inputs and seed give a
/// bitwise-identical history and parameters.
pub fn train(inputs: &ObjectiveInputs<'_>, config: &TrainConfig) -> Result<(ModelParams, TrainHistory)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = initialize_params(model_dims(inputs, config), &mut rng);
    train_from(inputs, config, params, &mut rng)
}

pub fn train_from(
    inputs: &ObjectiveInputs<'_>,
    config: &TrainConfig,
    mut params: ModelParams,
    rng: &mut ChaCha8Rng,
) -> Result<(ModelParams, TrainHistory)> {
    config.validate()?;
    inputs.check(&params)?;
    if inputs.corpus.is_empty() {
        return Err(Error::Config("cannot train on an empty corpus".into()));
    }
    let k = params.dims().topics;
    let mut adam = Adam::new(params.dims(), config);
    let mut order: Vec<usize> = (0..inputs.corpus.len()).collect();
    let mut history = TrainHistory::default();
    for epoch in 0..config.epochs {
        order.shuffle(rng);
        let mut acc = ObjectiveTerms::default();
        for (bi, batch) in order.chunks(config.batch_size).enumerate() {
            let noise = sample_noise(batch.len(), k, rng);
            let (terms, grad) = objective_gradient(inputs, batch, &params, &noise)?;
            if !terms.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: bi });
            }
            let w = batch.len() as f64;
            acc.elbo += w * terms.elbo;
            acc.r_beta += w * terms.r_beta;
            acc.r_theta += w * terms.r_theta;
            acc.r_gamma += w * terms.r_gamma;
            acc.objective += w * terms.objective;
            adam.step(&mut params, &grad);
            if !params.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: bi });
            }
        }
        let n = order.len() as f64;
        let record = EpochRecord {
            epoch: epoch + 1,
            elbo: acc.elbo / n,
            r_beta: acc.r_beta / n,
            r_theta: acc.r_theta / n,
            r_gamma: acc.r_gamma / n,
            objective: acc.objective / n,
        };
        log::info!(
            "epoch {} objective {:.6} elbo {:.6} r_beta {:.6} r_theta {:.6} r_gamma {:.6}",
            record.epoch,
            record.objective,
            record.elbo,
            record.r_beta,
            record.r_theta,
            record.r_gamma
        );
        history.epochs.push(record);
    }
    Ok((params, history))
}

/// Max over `coords` of `|analytic - numeric| / max(|numeric|, 1e-8)`,
/// with `numeric` the central difference of `f` at step `fd_eps`.
pub fn finite_difference_check<F>(
    mut f: F,
    x: &[f64],
    analytic: &[f64],
    coords: &[usize],
    fd_eps: f64,
) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for &i in coords {
        probe[i] = x[i] + fd_eps;
        let up = f(&probe);
        probe[i] = x[i] - fd_eps;
        let down = f(&probe);
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * fd_eps);
        let err = (analytic[i] - numeric).abs() / numeric.abs().max(1e-8);
        worst = worst.max(err);
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub coordinates: usize,
}

/// Compares the analytic gradient of [`total_objective`] with central
/// finite differences on `samples` coordinates: a quarter drawn from the
/// topic embeddings, the rest from the encoder.
pub fn gradient_check(
    inputs: &ObjectiveInputs<'_>,
    batch: &[usize],
    params: &ModelParams,
    noise: &Array2<f64>,
    fd_eps: f64,
    samples: usize,
    seed: u64,
) -> Result<GradientCheck> {
    let (_, grad) = objective_gradient(inputs, batch, params, noise)?;
    let n_alpha_total = params.alpha.len();
    let n_total = params.num_params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_alpha = (samples / 4).min(n_alpha_total);
    let mut coords: Vec<usize> =
        rand::seq::index::sample(&mut rng, n_alpha_total, n_alpha).into_vec();
    let n_enc = (samples - n_alpha).min(n_total - n_alpha_total);
    coords.extend(
        rand::seq::index::sample(&mut rng, n_total - n_alpha_total, n_enc)
            .into_iter()
            .map(|i| i + n_alpha_total),
    );
    coords.sort_unstable();

    let x: Vec<f64> = (0..n_total).map(|i| params.get(i)).collect();
    let analytic: Vec<f64> = (0..n_total).map(|i| grad.get(i)).collect();
    let mut probe = params.clone();
    let mut failure = None;
    let err = finite_difference_check(
        |point| {
            for &i in &coords {
                probe.set(i, point[i]);
            }
            match total_objective(inputs, batch, &probe, noise) {
                Ok(t) => t.objective,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        &x,
        &analytic,
        &coords,
        fd_eps,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(GradientCheck {
        max_relative_error: err,
        coordinates: coords.len(),
    })
}
