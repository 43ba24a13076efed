//! Guidance signals and the regularizers built on them.
//!
//! Three kinds of guidance constrain training, each gated per topic by a
//! [`SupervisionMask`]:
//!
//! * topic level: reference distributions over a source vocabulary, compared
//!   with the model's reference projection;
//! * document level: soft labels per document, sharpened into target
//!   document-topic distributions;
//! * word level: a distribution over the target vocabulary derived from the
//!   cosine similarity between a topic's surface name and every word.
//!
//! Every KL term puts the target first and the model quantity second.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embeddings::{
    cosine, embedding_matrix_for, name_embedding, EmbeddingMatrix, EmbeddingTable,
    MissingPolicy,
};
use crate::error::{Error, Result};
use crate::etm::{softmax, softmax_in_place, TopicWordDist};
use crate::fsutil;

pub const KL_EPS: f64 = 1e-12;
const SIMPLEX_TOL: f64 = 1e-6;
const REFERENCE_RENORM_TOL: f64 = 1e-3;
const MIN_RESTRICTED_MASS: f64 = 1e-8;

pub const DEFAULT_GAMMA_TAU: f64 = 0.1;
pub const DEFAULT_PSEUDO_LABEL_TAU: f64 = 0.1;

fn check_simplex(what: &str, p: &[f64]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL || p.iter().any(|&x| x < 0.0 || x.is_nan()) {
        return Err(Error::NotADistribution {
            what: what.to_owned(),
            sum,
        });
    }
    Ok(())
}

/// `sum_i p_i log(p_i / max(q_i, 1e-12))` with `0 log 0 = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    check_simplex("target", p)?;
    check_simplex("model", q)?;
    Ok(kl_unchecked(p.iter().copied(), q.iter().copied()))
}

pub(crate) fn kl_unchecked(
    p: impl IntoIterator<Item = f64>,
    q: impl IntoIterator<Item = f64>,
) -> f64 {
    p.into_iter()
        .zip(q)
        .filter(|&(pi, _)| pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi.max(KL_EPS)).ln())
        .sum()
}

fn kl_rows(p: ArrayView1<'_, f64>, q: ArrayView1<'_, f64>) -> Result<f64> {
    kl_divergence(
        p.as_slice().expect("standard layout"),
        q.as_slice().expect("standard layout"),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupervisionMode {
    /// Adapted from a reference topic: topic, document and word level.
    Full,
    /// Only the surface name is known: word level.
    NameOnly,
    /// Discovery topic.
    #[default]
    None,
}

impl SupervisionMode {
    pub fn label(self) -> &'static str {
        match self {
            SupervisionMode::Full => "adapted",
            SupervisionMode::NameOnly => "name-only",
            SupervisionMode::None => "discovered",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupervisionMask {
    pub use_topic_level: bool,
    pub use_word_level: bool,
    pub use_doc_level: bool,
}

impl From<SupervisionMode> for SupervisionMask {
    fn from(mode: SupervisionMode) -> Self {
        match mode {
            SupervisionMode::Full => SupervisionMask {
                use_topic_level: true,
                use_word_level: true,
                use_doc_level: true,
            },
            SupervisionMode::NameOnly => SupervisionMask {
                use_word_level: true,
                ..Default::default()
            },
            SupervisionMode::None => SupervisionMask::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub supervision: SupervisionMode,
}

/// Per-topic configuration. The number of entries fixes `K`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicConfig {
    #[serde(rename = "topic")]
    pub topics: Vec<TopicSpec>,
}

impl TopicConfig {
    /// `k` discovery topics with no names.
    pub fn unsupervised(k: usize) -> Self {
        TopicConfig {
            topics: vec![
                TopicSpec {
                    name: None,
                    supervision: SupervisionMode::None,
                };
                k
            ],
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: TopicConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("topic config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fsutil::read_to_string(path)?).map_err(|e| match e {
            Error::Config(m) => Error::format(path, m),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.topics.is_empty() {
            return Err(Error::Config("topic config has no topics".into()));
        }
        let mut seen = HashSet::new();
        for (k, t) in self.topics.iter().enumerate() {
            if t.supervision != SupervisionMode::None && t.name.is_none() {
                return Err(Error::Config(format!(
                    "topic {k} uses {:?} supervision but has no name",
                    t.supervision
                )));
            }
            if let Some(n) = &t.name {
                if !seen.insert(n.as_str()) {
                    return Err(Error::Config(format!("duplicate topic name {n:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn masks(&self) -> Vec<SupervisionMask> {
        self.topics.iter().map(|t| t.supervision.into()).collect()
    }

    pub fn names(&self) -> Vec<Option<String>> {
        self.topics.iter().map(|t| t.name.clone()).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("topic config serializes")
    }
}

/// Reference topic-word distributions over the source vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTopics {
    pub ref_vocab: Vec<String>,
    pub names: Vec<String>,
    /// `k_named x V_ref`
    pub beta_ref: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
struct ReferenceFile {
    vocab: Vec<String>,
    topics: Vec<ReferenceEntry>,
}

#[derive(Serialize, Deserialize)]
struct ReferenceEntry {
    name: String,
    dist: Vec<f64>,
}

impl ReferenceTopics {
    /// Validates rows; rows within 1e-3 of the simplex are renormalized,
    /// anything further off is rejected.
    pub fn new(ref_vocab: Vec<String>, topics: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if ref_vocab.is_empty() || topics.is_empty() {
            return Err(Error::Config("reference topics need a vocabulary and topics".into()));
        }
        let mut names = Vec::with_capacity(topics.len());
        let mut beta_ref = Array2::zeros((topics.len(), ref_vocab.len()));
        let mut seen = HashSet::new();
        for (j, (name, mut dist)) in topics.into_iter().enumerate() {
            if !seen.insert(name.clone()) {
                return Err(Error::Config(format!("duplicate reference topic {name:?}")));
            }
            if dist.len() != ref_vocab.len() {
                return Err(Error::DimMismatch(format!(
                    "reference topic {name:?} has {} entries for a {}-word vocabulary",
                    dist.len(),
                    ref_vocab.len()
                )));
            }
            let sum: f64 = dist.iter().sum();
            if dist.iter().any(|&x| !(x >= 0.0) || !x.is_finite())
                || (sum - 1.0).abs() > REFERENCE_RENORM_TOL
            {
                return Err(Error::NotADistribution {
                    what: format!("reference topic {name:?}"),
                    sum,
                });
            }
            for x in &mut dist {
                *x /= sum;
            }
            beta_ref.row_mut(j).assign(&ArrayView1::from(&dist));
            names.push(name);
        }
        Ok(ReferenceTopics {
            ref_vocab,
            names,
            beta_ref,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: ReferenceFile = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("reference topics: {e}")))?;
        Self::new(
            raw.vocab,
            raw.topics.into_iter().map(|t| (t.name, t.dist)).collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fsutil::read_to_string(path)?).map_err(|e| match e {
            Error::Config(m) => Error::format(path, m),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        let file = ReferenceFile {
            vocab: self.ref_vocab.clone(),
            topics: self
                .names
                .iter()
                .zip(self.beta_ref.rows())
                .map(|(n, r)| ReferenceEntry {
                    name: n.clone(),
                    dist: r.to_vec(),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("reference serializes")
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Raw soft labels `p_dk`, one row per corpus document.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabelMatrix {
    pub names: Vec<String>,
    pub doc_ids: Vec<String>,
    /// `|D| x k`
    pub p: Array2<f64>,
    /// Column sums, always recomputed from `p`.
    pub f: Vec<f64>,
}

impl SoftLabelMatrix {
    pub fn new(names: Vec<String>, doc_ids: Vec<String>, p: Array2<f64>) -> Result<Self> {
        if p.ncols() != names.len() || p.nrows() != doc_ids.len() {
            return Err(Error::DimMismatch(format!(
                "soft labels are {:?} for {} documents and {} names",
                p.dim(),
                doc_ids.len(),
                names.len()
            )));
        }
        if let Some(x) = p.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::Config(format!("soft label {x} outside [0, 1]")));
        }
        let f = p.columns().into_iter().map(|c| c.sum()).collect();
        Ok(SoftLabelMatrix {
            names,
            doc_ids,
            p,
            f,
        })
    }

    /// Parses the CSV form and checks it row-by-row against the corpus.
    pub fn parse_csv(text: &str, corpus: &Corpus) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| Error::Config(format!("soft labels: {e}")))?
            .clone();
        if header.get(0) != Some("doc_id") || header.len() < 2 {
            return Err(Error::Config(
                "soft-label header must be doc_id,<name1>,...,<namek>".into(),
            ));
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        let docs = corpus.documents();
        let mut p = Array2::zeros((docs.len(), names.len()));
        let mut doc_ids = Vec::with_capacity(docs.len());
        let mut rows = 0usize;
        for (d, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Config(format!("soft labels: {e}")))?;
            let line = d + 2;
            if d >= docs.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("more soft-label rows than the {} corpus documents", docs.len()),
                });
            }
            let id = record.get(0).unwrap_or_default();
            if id != docs[d].doc_id {
                return Err(Error::Parse {
                    line,
                    message: format!("doc_id {id:?} does not match corpus document {:?}", docs[d].doc_id),
                });
            }
            if record.len() != names.len() + 1 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, found {}", names.len() + 1, record.len()),
                });
            }
            for (k, field) in record.iter().skip(1).enumerate() {
                p[[d, k]] = field.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("non-numeric soft label {field:?}"),
                })?;
            }
            doc_ids.push(id.to_owned());
            rows += 1;
        }
        if rows != docs.len() {
            return Err(Error::Config(format!(
                "soft-label file has {rows} rows, corpus has {} documents",
                docs.len()
            )));
        }
        Self::new(names, doc_ids, p)
    }

    pub fn load(path: &Path, corpus: &Corpus) -> Result<Self> {
        Self::parse_csv(&fsutil::read_to_string(path)?, corpus).map_err(|e| match e {
            Error::Config(m) => Error::format(path, m),
            Error::Parse { line, message } => Error::format(path, format!("line {line}: {message}")),
            other => other,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("doc_id");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (id, row) in self.doc_ids.iter().zip(self.p.rows()) {
            out.push_str(id);
            for x in row {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
        out
    }

    /// Keeps only the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<Self> {
        let mut p = Array2::zeros((self.p.nrows(), names.len()));
        for (c, name) in names.iter().enumerate() {
            let src = self.names.iter().position(|n| n == name).ok_or_else(|| {
                Error::Config(format!("soft-label file has no column for topic {name:?}"))
            })?;
            p.column_mut(c).assign(&self.p.column(src));
        }
        Self::new(names.to_vec(), self.doc_ids.clone(), p)
    }
}

/// Sharpened document targets, `|D| x k`, rows on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SharpenedTargets {
    pub theta_t: Array2<f64>,
}

/// `theta_t[d][k] = (p[d][k]^2 / f_k) / sum_k' (p[d][k']^2 / f_k')` with
/// `f_k = sum_d p[d][k]`.
pub fn sharpen_soft_labels(labels: &SoftLabelMatrix) -> Result<SharpenedTargets> {
    let p = &labels.p;
    let f: Vec<f64> = p.columns().into_iter().map(|c| c.sum()).collect();
    if let Some(k) = f.iter().position(|&fk| fk <= 0.0) {
        return Err(Error::DegenerateColumn(
            labels.names.get(k).cloned().unwrap_or_else(|| k.to_string()),
        ));
    }
    let mut theta_t = Array2::zeros(p.dim());
    for (d, row) in p.rows().into_iter().enumerate() {
        if row.iter().all(|&x| x == 0.0) {
            return Err(Error::DegenerateRow(d));
        }
        let mut out = theta_t.row_mut(d);
        for (k, &x) in row.iter().enumerate() {
            out[k] = x * x / f[k];
        }
        let z = out.sum();
        out /= z;
    }
    Ok(SharpenedTargets { theta_t })
}

/// Word-level guidance, one row per named topic.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceDist {
    pub gamma: Array2<f64>,
}

/// `gamma[j][v] = softmax_v(cos(name_j, rho_v) / tau)`.
pub fn build_gamma(
    names: &[String],
    rho: &EmbeddingMatrix,
    table: &EmbeddingTable,
    tau: f64,
) -> Result<GuidanceDist> {
    if !(tau > 0.0) {
        return Err(Error::Config(format!("temperature must be positive, got {tau}")));
    }
    let mut gamma = Array2::zeros((names.len(), rho.rows()));
    for (j, name) in names.iter().enumerate() {
        let e = name_embedding(name, table);
        if e.iter().all(|&x| x == 0.0) {
            return Err(Error::NamelessTopic(name.clone()));
        }
        let mut row: Vec<f64> = rho
            .matrix
            .rows()
            .into_iter()
            .map(|r| cosine(&e, r.as_slice().expect("standard layout")).map(|c| c / tau))
            .collect::<Result<_>>()?;
        softmax_in_place(&mut row);
        gamma.row_mut(j).assign(&ArrayView1::from(&row));
    }
    Ok(GuidanceDist { gamma })
}

/// Embedding-similarity stand-in for entailment soft labels:
/// `p[d][k] = softmax_k(cos(centroid_d, name_k) / tau)`, where `centroid_d`
/// is the count-weighted mean embedding of the document's words.
pub fn fallback_pseudo_labels(
    corpus: &Corpus,
    rho: &EmbeddingMatrix,
    names: &[String],
    table: &EmbeddingTable,
    tau: f64,
) -> Result<SoftLabelMatrix> {
    if names.is_empty() {
        return Err(Error::Config("pseudo-labels need at least one topic name".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::Config(format!("temperature must be positive, got {tau}")));
    }
    let name_vecs: Vec<Vec<f64>> = names
        .iter()
        .map(|n| {
            let e = name_embedding(n, table);
            if e.iter().all(|&x| x == 0.0) {
                Err(Error::NamelessTopic(n.clone()))
            } else {
                Ok(e)
            }
        })
        .collect::<Result<_>>()?;
    let dim = rho.dim();
    let mut p = Array2::zeros((corpus.len(), names.len()));
    for (d, doc) in corpus.documents().iter().enumerate() {
        let mut centroid = vec![0.0; dim];
        let total = doc.total() as f64;
        for &(v, c) in &doc.counts {
            let w = f64::from(c) / total;
            for (a, x) in centroid.iter_mut().zip(rho.matrix.row(v)) {
                *a += w * x;
            }
        }
        let logits: Vec<f64> = name_vecs
            .iter()
            .map(|e| cosine(&centroid, e).map(|c| c / tau))
            .collect::<Result<_>>()?;
        p.row_mut(d).assign(&ArrayView1::from(&softmax(&logits)));
    }
    SoftLabelMatrix::new(
        names.to_vec(),
        corpus.documents().iter().map(|d| d.doc_id.clone()).collect(),
        p,
    )
}

/// Mean `KL(beta_ref[j] || beta_proj[j])` over topics with topic-level
/// supervision. `beta_ref` rows are aligned index-wise with model topics.
pub fn topic_regularizer(
    beta_ref: &Array2<f64>,
    beta_proj: &Array2<f64>,
    mask: &[SupervisionMask],
) -> Result<f64> {
    masked_mean_kl(beta_ref, beta_proj, mask, |m| m.use_topic_level, "topic-level")
}

/// Mean `KL(gamma[j] || beta[j])` over topics with word-level supervision.
pub fn word_regularizer(
    gamma: &Array2<f64>,
    beta: &TopicWordDist,
    mask: &[SupervisionMask],
) -> Result<f64> {
    masked_mean_kl(gamma, &beta.beta, mask, |m| m.use_word_level, "word-level")
}

fn masked_mean_kl(
    target: &Array2<f64>,
    model: &Array2<f64>,
    mask: &[SupervisionMask],
    active: impl Fn(&SupervisionMask) -> bool,
    what: &'static str,
) -> Result<f64> {
    if target.ncols() != model.ncols() {
        return Err(Error::DimMismatch(format!(
            "{what} targets have {} columns, model has {}",
            target.ncols(),
            model.ncols()
        )));
    }
    let topics: Vec<usize> = (0..mask.len()).filter(|&j| active(&mask[j])).collect();
    if topics.is_empty() {
        return Err(Error::EmptyMask(what));
    }
    let mut sum = 0.0;
    for &j in &topics {
        if j >= target.nrows() || j >= model.nrows() {
            return Err(Error::DimMismatch(format!("{what} topic {j} has no row")));
        }
        sum += kl_rows(target.row(j), model.row(j))?;
    }
    Ok(sum / topics.len() as f64)
}

/// Indices of topics with document-level supervision, in model order. The
/// columns of the sharpened targets follow this order.
pub fn doc_level_topics(mask: &[SupervisionMask]) -> Vec<usize> {
    (0..mask.len()).filter(|&j| mask[j].use_doc_level).collect()
}

/// Mean over the batch of `KL(theta_t[d] || theta_d)`, where `theta_d` is
/// restricted to the document-level topics and renormalized.
pub fn document_regularizer(
    targets: &SharpenedTargets,
    doc_indices: &[usize],
    theta_batch: &Array2<f64>,
    mask: &[SupervisionMask],
) -> Result<f64> {
    let topics = doc_level_topics(mask);
    if topics.is_empty() {
        return Err(Error::EmptyMask("document-level"));
    }
    if topics.len() != targets.theta_t.ncols() {
        return Err(Error::DimMismatch(format!(
            "{} document-level topics but targets have {} columns",
            topics.len(),
            targets.theta_t.ncols()
        )));
    }
    if doc_indices.len() != theta_batch.nrows() || doc_indices.is_empty() {
        return Err(Error::DimMismatch(format!(
            "{} document indices for {} theta rows",
            doc_indices.len(),
            theta_batch.nrows()
        )));
    }
    let mut sum = 0.0;
    for (&d, theta) in doc_indices.iter().zip(theta_batch.rows()) {
        let mut restricted: Vec<f64> = topics.iter().map(|&j| theta[j]).collect();
        let mass: f64 = restricted.iter().sum();
        if mass < MIN_RESTRICTED_MASS {
            return Err(Error::RenormalizationUnderflow { doc: d, mass });
        }
        for x in &mut restricted {
            *x /= mass;
        }
        let target = targets.theta_t.row(d);
        sum += kl_divergence(target.as_slice().expect("standard layout"), &restricted)?;
    }
    Ok(sum / doc_indices.len() as f64)
}

/// Topic-level targets aligned with model topic indices.
#[derive(Debug, Clone)]
pub struct ReferenceTarget {
    /// `K x V_ref`; rows of topics without topic-level supervision are
    /// uniform placeholders and never read.
    pub beta_ref: Array2<f64>,
    pub rho_ref: EmbeddingMatrix,
}

/// Everything the objective needs beyond the corpus and parameters.
/// Built once before training and read-only afterwards.
#[derive(Debug, Clone)]
pub struct SupervisionBundle {
    pub masks: Vec<SupervisionMask>,
    pub names: Vec<Option<String>>,
    pub modes: Vec<SupervisionMode>,
    pub reference: Option<ReferenceTarget>,
    pub doc_targets: Option<SharpenedTargets>,
    /// `K x V`, aligned like [`ReferenceTarget::beta_ref`].
    pub gamma: Option<Array2<f64>>,
}

#[derive(Debug, Clone, Copy)]
pub struct BundleOptions {
    pub missing_policy: MissingPolicy,
    pub gamma_tau: f64,
}

impl Default for BundleOptions {
    fn default() -> Self {
        BundleOptions {
            missing_policy: MissingPolicy::default(),
            gamma_tau: DEFAULT_GAMMA_TAU,
        }
    }
}

impl SupervisionBundle {
    /// No guidance at all: `k` discovery topics.
    pub fn unsupervised(k: usize) -> Self {
        SupervisionBundle {
            masks: vec![SupervisionMask::default(); k],
            names: vec![None; k],
            modes: vec![SupervisionMode::None; k],
            reference: None,
            doc_targets: None,
            gamma: None,
        }
    }

    pub fn build(
        corpus: &Corpus,
        rho: &EmbeddingMatrix,
        table: &EmbeddingTable,
        config: &TopicConfig,
        reference: Option<&ReferenceTopics>,
        soft_labels: Option<&SoftLabelMatrix>,
        options: BundleOptions,
    ) -> Result<Self> {
        config.validate()?;
        let k = config.len();
        let masks = config.masks();
        let names = config.names();
        let name_of = |j: usize| names[j].clone().expect("validated: supervised topics are named");

        let topic_level: Vec<usize> = (0..k).filter(|&j| masks[j].use_topic_level).collect();
        let reference = if topic_level.is_empty() {
            None
        } else {
            let r = reference.ok_or_else(|| {
                Error::Config("topic-level supervision requires a reference topics file".into())
            })?;
            let vr = r.ref_vocab.len();
            let mut beta_ref = Array2::from_elem((k, vr), 1.0 / vr as f64);
            for &j in &topic_level {
                let name = name_of(j);
                let row = r.index_of(&name).ok_or_else(|| {
                    Error::Config(format!("reference topics file has no topic named {name:?}"))
                })?;
                beta_ref.row_mut(j).assign(&r.beta_ref.row(row));
            }
            let rho_ref = embedding_matrix_for(&r.ref_vocab, table, options.missing_policy);
            Some(ReferenceTarget { beta_ref, rho_ref })
        };

        let doc_level = doc_level_topics(&masks);
        let doc_targets = if doc_level.is_empty() {
            None
        } else {
            let labels = soft_labels.ok_or_else(|| {
                Error::Config("document-level supervision requires a soft-label file".into())
            })?;
            if labels.doc_ids.len() != corpus.len()
                || labels
                    .doc_ids
                    .iter()
                    .zip(corpus.documents())
                    .any(|(a, b)| *a != b.doc_id)
            {
                return Err(Error::Config(
                    "soft-label rows do not match the corpus documents".into(),
                ));
            }
            let wanted: Vec<String> = doc_level.iter().map(|&j| name_of(j)).collect();
            Some(sharpen_soft_labels(&labels.select(&wanted)?)?)
        };

        let word_level: Vec<usize> = (0..k).filter(|&j| masks[j].use_word_level).collect();
        let gamma = if word_level.is_empty() {
            None
        } else {
            let wanted: Vec<String> = word_level.iter().map(|&j| name_of(j)).collect();
            let g = build_gamma(&wanted, rho, table, options.gamma_tau)?;
            let v = rho.rows();
            let mut aligned = Array2::from_elem((k, v), 1.0 / v as f64);
            for (row, &j) in word_level.iter().enumerate() {
                aligned.row_mut(j).assign(&g.gamma.row(row));
            }
            Some(aligned)
        };

        Ok(SupervisionBundle {
            masks,
            names,
            modes: config.topics.iter().map(|t| t.supervision).collect(),
            reference,
            doc_targets,
            gamma,
        })
    }

    pub fn num_topics(&self) -> usize {
        self.masks.len()
    }

    pub fn has_topic_level(&self) -> bool {
        self.masks.iter().any(|m| m.use_topic_level)
    }

    pub fn has_doc_level(&self) -> bool {
        self.masks.iter().any(|m| m.use_doc_level)
    }

    pub fn has_word_level(&self) -> bool {
        self.masks.iter().any(|m| m.use_word_level)
    }
}
