//! Topic quality metrics: NPMI coherence (TC), diversity (TD) and their
//! product (TQ), plus top-word tables.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Vocabulary};
use crate::error::{Error, Result};
use crate::etm::TopicWordDist;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicTopWords {
    /// Vocabulary indices per topic, highest probability first.
    pub indices: Vec<Vec<usize>>,
    pub words: Vec<Vec<String>>,
}

impl TopicTopWords {
    pub fn num_topics(&self) -> usize {
        self.indices.len()
    }

    /// Keeps the first `n` words of every list.
    pub fn truncated(&self, n: usize) -> TopicTopWords {
        TopicTopWords {
            indices: self.indices.iter().map(|l| l.iter().take(n).copied().collect()).collect(),
            words: self.words.iter().map(|l| l.iter().take(n).cloned().collect()).collect(),
        }
    }
}

/// The `min(n, V)` most probable words of each topic; ties go to the lower
/// vocabulary index.
pub fn top_words(beta: &TopicWordDist, vocab: &Vocabulary, n: usize) -> Result<TopicTopWords> {
    if n == 0 {
        return Err(Error::Config("top-word count must be at least 1".into()));
    }
    if beta.vocab_size() != vocab.len() {
        return Err(Error::DimMismatch(format!(
            "topic distributions cover {} words, vocabulary has {}",
            beta.vocab_size(),
            vocab.len()
        )));
    }
    let mut indices = Vec::with_capacity(beta.num_topics());
    for row in beta.beta.rows() {
        let mut order: Vec<usize> = (0..row.len()).collect();
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        order.truncate(n);
        indices.push(order);
    }
    let words = indices
        .iter()
        .map(|l: &Vec<usize>| l.iter().map(|&i| vocab.word(i).to_owned()).collect())
        .collect();
    Ok(TopicTopWords { indices, words })
}

/// Normalized PMI from smoothed document frequencies over `n_docs`
/// documents: `P(i) = (D_i + 1) / (|D| + 1)`, `P(i,j) = (D_ij + 1) / (|D| + 1)`.
/// A pair present in every document is constant, hence independent: 0.
pub fn npmi(d_i: usize, d_j: usize, d_ij: usize, n_docs: usize) -> f64 {
    let denom = n_docs as f64 + 1.0;
    let p_i = (d_i as f64 + 1.0) / denom;
    let p_j = (d_j as f64 + 1.0) / denom;
    let p_ij = (d_ij as f64 + 1.0) / denom;
    if d_ij >= n_docs {
        return 0.0;
    }
    (p_ij / (p_i * p_j)).ln() / -p_ij.ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coherence {
    pub mean: f64,
    pub per_topic: Vec<f64>,
}

/// Mean over topics of the mean NPMI over all unordered pairs of the
/// topic's words, with document-level co-occurrence.
pub fn topic_coherence(topics: &TopicTopWords, corpus: &Corpus) -> Result<Coherence> {
    if corpus.is_empty() {
        return Err(Error::Config("coherence needs at least one document".into()));
    }
    let needed: HashSet<usize> = topics.indices.iter().flatten().copied().collect();
    // per word, the sorted list of documents containing it
    let mut postings: Vec<Vec<u32>> = vec![Vec::new(); corpus.vocab_size()];
    for (d, doc) in corpus.documents().iter().enumerate() {
        for &(v, _) in &doc.counts {
            if needed.contains(&v) {
                postings[v].push(d as u32);
            }
        }
    }
    let n = corpus.len();
    let mut per_topic = Vec::with_capacity(topics.num_topics());
    for list in &topics.indices {
        let mut sum = 0.0;
        let mut pairs = 0usize;
        for (a, &i) in list.iter().enumerate() {
            for &j in &list[a + 1..] {
                let joint = intersection_len(&postings[i], &postings[j]);
                sum += npmi(postings[i].len(), postings[j].len(), joint, n);
                pairs += 1;
            }
        }
        per_topic.push(if pairs == 0 { 0.0 } else { sum / pairs as f64 });
    }
    let mean = if per_topic.is_empty() {
        0.0
    } else {
        per_topic.iter().sum::<f64>() / per_topic.len() as f64
    };
    Ok(Coherence { mean, per_topic })
}

fn intersection_len(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Fraction of distinct words among every topic's top-`n` list.
pub fn topic_diversity(topics: &TopicTopWords, n: usize) -> Result<f64> {
    if topics.num_topics() == 0 {
        return Err(Error::Config("diversity of zero topics".into()));
    }
    let mut distinct = HashSet::new();
    for list in &topics.indices {
        if list.len() < n {
            return Err(Error::InsufficientVocab {
                needed: n,
                available: list.len(),
            });
        }
        distinct.extend(list.iter().take(n).copied());
    }
    Ok(distinct.len() as f64 / (n * topics.num_topics()) as f64)
}

pub fn topic_quality(tc: f64, td: f64) -> f64 {
    tc * td
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSettings {
    pub coherence_top_n: usize,
    pub diversity_top_n: usize,
    pub report_top_n: usize,
}

impl Default for MetricSettings {
    fn default() -> Self {
        MetricSettings {
            coherence_top_n: 10,
            diversity_top_n: 25,
            report_top_n: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicReport {
    pub topic: usize,
    pub label: String,
    pub mode: String,
    pub coherence: f64,
    pub top_words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tc: f64,
    pub td: f64,
    pub tq: f64,
    pub topics: Vec<TopicReport>,
}

/// Topic labels and supervision modes shown next to each row.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicLabel {
    pub name: Option<String>,
    pub mode: &'static str,
}

pub fn evaluate(
    beta: &TopicWordDist,
    corpus: &Corpus,
    labels: &[TopicLabel],
    settings: &MetricSettings,
) -> Result<EvalReport> {
    let vocab = corpus.vocabulary();
    let widest = settings
        .coherence_top_n
        .max(settings.diversity_top_n)
        .max(settings.report_top_n);
    let all = top_words(beta, vocab, widest)?;
    let coherence = topic_coherence(&all.truncated(settings.coherence_top_n), corpus)?;
    let td = topic_diversity(&all, settings.diversity_top_n)?;
    let tc = coherence.mean;
    let shown = all.truncated(settings.report_top_n);
    let topics = (0..beta.num_topics())
        .map(|k| {
            let label = labels.get(k);
            TopicReport {
                topic: k,
                label: label
                    .and_then(|l| l.name.clone())
                    .unwrap_or_else(|| format!("topic_{k}")),
                mode: label.map_or("discovered", |l| l.mode).to_owned(),
                coherence: coherence.per_topic[k],
                top_words: shown.words[k].clone(),
            }
        })
        .collect();
    Ok(EvalReport {
        tc,
        td,
        tq: topic_quality(tc, td),
        topics,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "TC {:.4}  TD {:.4}  TQ {:.4}", self.tc, self.td, self.tq);
        for t in &self.topics {
            let _ = writeln!(
                out,
                "{:>3}  {:<12} {:<11} {:>7.4}  {}",
                t.topic,
                t.label,
                t.mode,
                t.coherence,
                t.top_words.join(" ")
            );
        }
        out
    }
}

/// Per-topic top-word table, one line per topic, tab separated:
/// `topic  label  mode  word1 ... wordn`.
pub fn topic_table(top: &TopicTopWords, labels: &[TopicLabel]) -> String {
    let mut out = String::new();
    for (k, words) in top.words.iter().enumerate() {
        let label = labels.get(k);
        let name = label
            .and_then(|l| l.name.clone())
            .unwrap_or_else(|| format!("topic_{k}"));
        let mode = label.map_or("discovered", |l| l.mode);
        let _ = writeln!(out, "{k}\t{name}\t{mode}\t{}", words.join(" "));
    }
    out
}
