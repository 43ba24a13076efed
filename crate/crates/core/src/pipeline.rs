//! Config-driven commands shared by the command-line tool and the C API.
//!
//! Every command reads its inputs from a [`RunConfig`], validates them all
//! before doing any work, and writes its outputs atomically into the output
//! directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::corpus::{build_from_text, drop_report, BuildOptions, Corpus};
use crate::embeddings::{vocabulary_matrix, EmbeddingMatrix, EmbeddingTable, MissingPolicy};
use crate::error::{Error, Result};
use crate::etm::{compute_beta, encode_document, softmax, ModelParams};
use crate::evaluation::{evaluate, top_words, topic_table, EvalReport, MetricSettings, TopicLabel};
use crate::fsutil::{read_to_string, write_atomic};
use crate::supervision::{
    fallback_pseudo_labels, BundleOptions, ReferenceTopics, SoftLabelMatrix, SupervisionBundle,
    TopicConfig, DEFAULT_GAMMA_TAU, DEFAULT_PSEUDO_LABEL_TAU,
};
use crate::trainer::{train as run_training, EpochRecord, ObjectiveInputs, TrainConfig, TrainHistory};

pub const VOCAB_FILE: &str = "vocab.txt";
pub const CORPUS_FILE: &str = "corpus.json";
pub const DROPS_FILE: &str = "drops.tsv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const HISTORY_FILE: &str = "history.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const TOPICS_FILE: &str = "topics.tsv";
pub const EVAL_FILE: &str = "eval.json";
pub const THETA_FILE: &str = "theta.csv";
pub const SOFT_LABELS_FILE: &str = "soft_labels.csv";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Raw text, one document per line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus_text: Option<PathBuf>,
    /// Built corpus (`corpus.json` from `build-corpus`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub soft_labels: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topic_config: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Defaults to `<output_dir>/checkpoint.bin`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

impl Paths {
    fn fields_mut(&mut self) -> [&mut Option<PathBuf>; 8] {
        [
            &mut self.corpus_text,
            &mut self.corpus,
            &mut self.embeddings,
            &mut self.reference,
            &mut self.soft_labels,
            &mut self.topic_config,
            &mut self.output_dir,
            &mut self.checkpoint,
        ]
    }

    /// Resolves relative entries against `base`.
    pub fn resolve_against(&mut self, base: &Path) {
        for p in self.fields_mut().into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSettings {
    pub min_df: usize,
    pub max_df_frac: f64,
    /// Stopword file, one word per line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stopwords: Option<PathBuf>,
}

impl Default for CorpusSettings {
    fn default() -> Self {
        CorpusSettings {
            min_df: 1,
            max_df_frac: 1.0,
            stopwords: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSettings {
    pub missing_policy: MissingPolicy,
    /// Temperature of the word-level guidance softmax.
    pub name_temperature: f64,
    /// Temperature of the embedding-similarity pseudo-labels.
    pub pseudo_label_temperature: f64,
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        EmbeddingSettings {
            missing_policy: MissingPolicy::default(),
            name_temperature: DEFAULT_GAMMA_TAU,
            pseudo_label_temperature: DEFAULT_PSEUDO_LABEL_TAU,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub corpus: CorpusSettings,
    pub embeddings: EmbeddingSettings,
    pub train: TrainConfig,
    pub eval: MetricSettings,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::parse(&read_to_string(path)?).map_err(|e| match e {
            Error::Config(m) => Error::format(path, m),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.paths.resolve_against(base);
        if let Some(s) = &mut cfg.corpus.stopwords {
            if s.is_relative() {
                *s = base.join(&*s);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    fn output_dir(&self) -> Result<&Path> {
        require(&self.paths.output_dir, "output_dir", "--output-dir")
    }

    fn output(&self, file: &str) -> Result<PathBuf> {
        Ok(self.output_dir()?.join(file))
    }

    fn checkpoint_path(&self) -> Result<PathBuf> {
        match &self.paths.checkpoint {
            Some(p) => Ok(p.clone()),
            None => self.output(CHECKPOINT_FILE),
        }
    }

    /// Same config with every path made absolute, for echoing next to
    /// outputs.
    fn absolutized(&self) -> RunConfig {
        let mut out = self.clone();
        let cwd = std::env::current_dir().unwrap_or_default();
        out.paths.resolve_against(&cwd);
        if let Some(s) = &mut out.corpus.stopwords {
            if s.is_relative() {
                *s = cwd.join(&*s);
            }
        }
        out
    }
}

fn require<'a>(p: &'a Option<PathBuf>, key: &str, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("no {key} given (paths.{key} or {flag})")))
}

fn require_existing<'a>(p: &'a Option<PathBuf>, key: &str, flag: &str) -> Result<&'a Path> {
    let path = require(p, key, flag)?;
    if !path.exists() {
        return Err(Error::Config(format!(
            "{key} file {} does not exist",
            path.display()
        )));
    }
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildSummary {
    pub vocab_size: usize,
    pub documents: usize,
    pub dropped: usize,
    pub output_dir: PathBuf,
}

/// Text to vocabulary, serialized corpus, and drop report.
pub fn build_corpus(cfg: &RunConfig) -> Result<BuildSummary> {
    let text_path = require_existing(&cfg.paths.corpus_text, "corpus_text", "--corpus-text")?;
    let out = cfg.output_dir()?;
    let stopwords = match &cfg.corpus.stopwords {
        Some(p) => read_to_string(p)?
            .lines()
            .map(str::trim)
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .collect(),
        None => Vec::new(),
    };
    let options = BuildOptions {
        min_df: cfg.corpus.min_df,
        max_df_frac: cfg.corpus.max_df_frac,
        stopwords,
    };
    if options.min_df < 1 || !(options.max_df_frac > 0.0 && options.max_df_frac <= 1.0) {
        return Err(Error::Config(
            "corpus filters need min_df >= 1 and 0 < max_df_frac <= 1".into(),
        ));
    }
    let built = build_from_text(&read_to_string(text_path)?, &options)?;
    let corpus = &built.corpus;
    write_atomic(&out.join(VOCAB_FILE), corpus.vocabulary().export_text().as_bytes())?;
    write_atomic(&out.join(CORPUS_FILE), corpus.to_json().as_bytes())?;
    write_atomic(&out.join(DROPS_FILE), drop_report(&built.dropped).as_bytes())?;
    Ok(BuildSummary {
        vocab_size: corpus.vocab_size(),
        documents: corpus.len(),
        dropped: built.dropped.len(),
        output_dir: out.to_path_buf(),
    })
}

struct Inputs {
    corpus: Corpus,
    table: EmbeddingTable,
    rho: EmbeddingMatrix,
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let corpus_path = require_existing(&cfg.paths.corpus, "corpus", "--corpus")?;
    let emb_path = require_existing(&cfg.paths.embeddings, "embeddings", "--embeddings")?;
    let corpus = Corpus::load(corpus_path)?;
    let table = EmbeddingTable::load(emb_path)?;
    let rho = vocabulary_matrix(corpus.vocabulary(), &table, cfg.embeddings.missing_policy);
    if rho.coverage < 1.0 {
        log::warn!(
            "{:.1}% of the vocabulary has no embedding ({:?} policy)",
            100.0 * (1.0 - rho.coverage),
            cfg.embeddings.missing_policy
        );
    }
    Ok(Inputs { corpus, table, rho })
}

/// The topic config, or `k_total` unnamed discovery topics when none is
/// given.
fn topic_config(cfg: &RunConfig) -> Result<TopicConfig> {
    match &cfg.paths.topic_config {
        Some(p) => {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "topic_config file {} does not exist",
                    p.display()
                )));
            }
            let topics = TopicConfig::load(p)?;
            if let Some(k) = cfg.train.k_total {
                if k != topics.len() {
                    return Err(Error::Config(format!(
                        "k_total = {k} but the topic config lists {} topics",
                        topics.len()
                    )));
                }
            }
            Ok(topics)
        }
        None => match cfg.train.k_total {
            Some(k) => Ok(TopicConfig::unsupervised(k)),
            None => Err(Error::Config(
                "give a topic config (paths.topic_config) or a topic count (train.k_total)".into(),
            )),
        },
    }
}

pub fn topic_labels(topics: &TopicConfig) -> Vec<TopicLabel> {
    topics
        .topics
        .iter()
        .map(|t| TopicLabel {
            name: t.name.clone(),
            mode: t.supervision.label(),
        })
        .collect()
}

/// Checks that the optional supervision files match what the masks demand.
fn supervision_files(cfg: &RunConfig, topics: &TopicConfig) -> Result<(Option<PathBuf>, Option<PathBuf>)> {
    let masks = topics.masks();
    let demand = |pick: fn(&crate::supervision::SupervisionMask) -> bool,
                  level: &str,
                  path: &Option<PathBuf>,
                  key: &str,
                  flag: &str|
     -> Result<Option<PathBuf>> {
        let needed = masks.iter().position(pick);
        match (needed, path) {
            (Some(k), None) => Err(Error::Config(format!(
                "topic {k} uses {level}-level supervision but no {key} file was given (paths.{key} or {flag})"
            ))),
            (Some(_), Some(p)) => {
                if p.exists() {
                    Ok(Some(p.clone()))
                } else {
                    Err(Error::Config(format!("{key} file {} does not exist", p.display())))
                }
            }
            (None, Some(p)) => {
                log::warn!("no topic uses {level}-level supervision; ignoring {}", p.display());
                Ok(None)
            }
            (None, None) => Ok(None),
        }
    };
    let reference = demand(
        |m| m.use_topic_level,
        "topic",
        &cfg.paths.reference,
        "reference",
        "--reference",
    )?;
    let soft = demand(
        |m| m.use_doc_level,
        "document",
        &cfg.paths.soft_labels,
        "soft_labels",
        "--soft-labels",
    )?;
    Ok((reference, soft))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub history: TrainHistory,
    pub last: EpochRecord,
    pub checkpoint: PathBuf,
    pub history_path: PathBuf,
}

/// Validates every input, trains, and writes the checkpoint, the history,
/// and the effective config.
pub fn train(cfg: &RunConfig) -> Result<TrainSummary> {
    cfg.train.validate()?;
    let out = cfg.output_dir()?.to_path_buf();
    let topics = topic_config(cfg)?;
    let (reference_path, soft_path) = supervision_files(cfg, &topics)?;
    let inputs = load_inputs(cfg)?;
    let reference = reference_path.as_deref().map(ReferenceTopics::load).transpose()?;
    let soft = soft_path
        .as_deref()
        .map(|p| SoftLabelMatrix::load(p, &inputs.corpus))
        .transpose()?;
    let bundle = SupervisionBundle::build(
        &inputs.corpus,
        &inputs.rho,
        &inputs.table,
        &topics,
        reference.as_ref(),
        soft.as_ref(),
        BundleOptions {
            missing_policy: cfg.embeddings.missing_policy,
            gamma_tau: cfg.embeddings.name_temperature,
        },
    )?;
    let objective = ObjectiveInputs {
        corpus: &inputs.corpus,
        rho: &inputs.rho,
        supervision: &bundle,
        weights: cfg.train.weights(),
    };
    let (params, history) = run_training(&objective, &cfg.train)?;
    let last = *history.last().expect("at least one epoch");

    let checkpoint = Checkpoint {
        params,
        vocab_hash: inputs.corpus.vocabulary().content_hash(),
    };
    let ckpt_path = out.join(CHECKPOINT_FILE);
    let history_path = out.join(HISTORY_FILE);
    checkpoint.save(&ckpt_path)?;
    write_atomic(&history_path, history.to_csv().as_bytes())?;
    let mut echoed = cfg.absolutized();
    echoed.paths.checkpoint = echoed.paths.output_dir.as_ref().map(|d| d.join(CHECKPOINT_FILE));
    write_atomic(&out.join(CONFIG_FILE), echoed.to_toml().as_bytes())?;
    Ok(TrainSummary {
        history,
        last,
        checkpoint: ckpt_path,
        history_path,
    })
}

struct LoadedModel {
    inputs: Inputs,
    params: ModelParams,
    labels: Vec<TopicLabel>,
}

fn load_model(cfg: &RunConfig) -> Result<LoadedModel> {
    let ckpt_path = cfg.checkpoint_path()?;
    if !ckpt_path.exists() {
        return Err(Error::Config(format!(
            "checkpoint file {} does not exist",
            ckpt_path.display()
        )));
    }
    let checkpoint = Checkpoint::load(&ckpt_path)?;
    let inputs = load_inputs(cfg)?;
    let corpus_hash = inputs.corpus.vocabulary().content_hash();
    if checkpoint.vocab_hash != corpus_hash {
        return Err(Error::VocabularyMismatch {
            checkpoint: checkpoint.vocab_hash,
            corpus: corpus_hash,
        });
    }
    let dims = checkpoint.params.dims();
    if dims.embedding != inputs.rho.dim() {
        return Err(Error::DimMismatch(format!(
            "checkpoint topic embeddings have dimension {}, word embeddings {}",
            dims.embedding,
            inputs.rho.dim()
        )));
    }
    let labels = match &cfg.paths.topic_config {
        Some(p) => {
            let topics = TopicConfig::load(p)?;
            if topics.len() != dims.topics {
                return Err(Error::DimMismatch(format!(
                    "checkpoint has {} topics, topic config lists {}",
                    dims.topics,
                    topics.len()
                )));
            }
            topic_labels(&topics)
        }
        None => topic_labels(&TopicConfig::unsupervised(dims.topics)),
    };
    Ok(LoadedModel {
        inputs,
        params: checkpoint.params,
        labels,
    })
}

/// Top-`n` word table, one line per topic with its supervision mode.
pub fn topics(cfg: &RunConfig, n: usize) -> Result<String> {
    if n == 0 {
        return Err(Error::Config("top-n must be at least 1".into()));
    }
    let model = load_model(cfg)?;
    let beta = compute_beta(&model.params.alpha, &model.inputs.rho)?;
    let top = top_words(&beta, model.inputs.corpus.vocabulary(), n)?;
    let table = topic_table(&top, &model.labels);
    if let Some(dir) = &cfg.paths.output_dir {
        write_atomic(&dir.join(TOPICS_FILE), table.as_bytes())?;
    }
    Ok(table)
}

/// Coherence, diversity, and quality of the trained topics.
pub fn eval(cfg: &RunConfig) -> Result<EvalReport> {
    let model = load_model(cfg)?;
    let beta = compute_beta(&model.params.alpha, &model.inputs.rho)?;
    let report = evaluate(&beta, &model.inputs.corpus, &model.labels, &cfg.eval)?;
    if let Some(dir) = &cfg.paths.output_dir {
        write_atomic(&dir.join(EVAL_FILE), report.to_json().as_bytes())?;
    }
    Ok(report)
}

/// Embedding-similarity soft labels for every named topic, written in the
/// format `train` reads.
pub fn pseudo_labels(cfg: &RunConfig) -> Result<(SoftLabelMatrix, PathBuf)> {
    let out = cfg.output(SOFT_LABELS_FILE)?;
    let topics = topic_config(cfg)?;
    let names: Vec<String> = topics.names().into_iter().flatten().collect();
    if names.is_empty() {
        return Err(Error::Config("the topic config names no topics".into()));
    }
    let inputs = load_inputs(cfg)?;
    let labels = fallback_pseudo_labels(
        &inputs.corpus,
        &inputs.rho,
        &names,
        &inputs.table,
        cfg.embeddings.pseudo_label_temperature,
    )?;
    write_atomic(&out, labels.to_csv().as_bytes())?;
    Ok((labels, out))
}

/// Deterministic document-topic proportions, `softmax(mu)`.
pub fn infer_theta_matrix(corpus: &Corpus, params: &ModelParams) -> Result<Array2<f64>> {
    let d = params.dims();
    if d.vocab != corpus.vocab_size() {
        return Err(Error::DimMismatch(format!(
            "model vocabulary {} vs corpus {}",
            d.vocab,
            corpus.vocab_size()
        )));
    }
    let mut theta = Array2::zeros((corpus.len(), d.topics));
    for (i, doc) in corpus.documents().iter().enumerate() {
        let (mu, _) = encode_document(doc, params);
        for (k, x) in softmax(&mu).into_iter().enumerate() {
            theta[[i, k]] = x;
        }
    }
    Ok(theta)
}

pub fn theta_csv(corpus: &Corpus, theta: &Array2<f64>, labels: &[TopicLabel]) -> String {
    let mut out = String::from("doc_id");
    for (k, l) in labels.iter().enumerate() {
        match &l.name {
            Some(n) => {
                let _ = write!(out, ",{n}");
            }
            None => {
                let _ = write!(out, ",topic_{k}");
            }
        }
    }
    out.push('\n');
    for (doc, row) in corpus.documents().iter().zip(theta.rows()) {
        out.push_str(&doc.doc_id);
        for x in row {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}

pub fn infer_theta(cfg: &RunConfig) -> Result<(Array2<f64>, PathBuf)> {
    let out = cfg.output(THETA_FILE)?;
    let model = load_model(cfg)?;
    let theta = infer_theta_matrix(&model.inputs.corpus, &model.params)?;
    write_atomic(
        &out,
        theta_csv(&model.inputs.corpus, &theta, &model.labels).as_bytes(),
    )?;
    Ok((theta, out))
}
