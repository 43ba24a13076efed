#![allow(dead_code)]

use std::path::{Path, PathBuf};

use topicadapt::corpus::Corpus;
use topicadapt::supervision::fallback_pseudo_labels;
use topicadapt::synthetic::PlantedModel;

/// Coherence recomputed from scratch: for every word pair, scan every
/// document's word set.
pub fn brute_force_coherence(corpus: &Corpus, lists: &[Vec<usize>]) -> f64 {
    let n = corpus.len() as f64;
    let sets: Vec<Vec<usize>> = corpus
        .documents()
        .iter()
        .map(|d| d.counts.iter().map(|&(v, _)| v).collect())
        .collect();
    let df = |w: usize| sets.iter().filter(|s| s.contains(&w)).count() as f64;
    let joint = |a: usize, b: usize| {
        sets.iter()
            .filter(|s| s.contains(&a) && s.contains(&b))
            .count() as f64
    };
    let mut topic_means = Vec::new();
    for list in lists {
        let mut scores = Vec::new();
        for a in 0..list.len() {
            for b in a + 1..list.len() {
                let (i, j) = (list[a], list[b]);
                let log_pi = (df(i) + 1.0).ln() - (n + 1.0).ln();
                let log_pj = (df(j) + 1.0).ln() - (n + 1.0).ln();
                let log_pij = (joint(i, j) + 1.0).ln() - (n + 1.0).ln();
                let score = if joint(i, j) == n {
                    0.0
                } else {
                    (log_pij - log_pi - log_pj) / -log_pij
                };
                scores.push(score);
            }
        }
        topic_means.push(scores.iter().sum::<f64>() / scores.len() as f64);
    }
    topic_means.iter().sum::<f64>() / topic_means.len() as f64
}

pub struct PlantedFiles {
    pub corpus: PathBuf,
    pub corpus_text: PathBuf,
    pub embeddings: PathBuf,
    pub reference: PathBuf,
    pub soft_labels: PathBuf,
    pub topic_config: PathBuf,
}

/// Writes a planted model to `dir`: built corpus, raw text, embeddings,
/// reference topics for `supervised`, pseudo soft labels for their names,
/// and a topic config with `supervised` as full topics followed by
/// `discovery` unnamed ones.
pub fn write_planted(model: &PlantedModel, dir: &Path, supervised: &[usize], discovery: usize) -> PlantedFiles {
    std::fs::create_dir_all(dir).unwrap();
    let files = PlantedFiles {
        corpus: dir.join("corpus.json"),
        corpus_text: dir.join("corpus.txt"),
        embeddings: dir.join("embeddings.txt"),
        reference: dir.join("reference.json"),
        soft_labels: dir.join("soft_labels.csv"),
        topic_config: dir.join("topics.toml"),
    };
    model.corpus.save(&files.corpus).unwrap();
    std::fs::write(&files.corpus_text, model.corpus_text()).unwrap();
    std::fs::write(&files.embeddings, model.embeddings_text()).unwrap();
    if !supervised.is_empty() {
        std::fs::write(&files.reference, model.reference(supervised).unwrap().to_json()).unwrap();
        let names: Vec<String> = supervised.iter().map(|&k| model.names[k].clone()).collect();
        let labels = fallback_pseudo_labels(&model.corpus, &model.rho, &names, &model.table, 0.1).unwrap();
        std::fs::write(&files.soft_labels, labels.to_csv()).unwrap();
    }
    std::fs::write(&files.topic_config, topic_config_text(model, supervised, "full", discovery)).unwrap();
    files
}

pub fn topic_config_text(model: &PlantedModel, named: &[usize], mode: &str, discovery: usize) -> String {
    let mut out = String::new();
    for &k in named {
        out.push_str(&format!("[[topic]]\nname = \"{}\"\nsupervision = \"{mode}\"\n\n", model.names[k]));
    }
    for _ in 0..discovery {
        out.push_str("[[topic]]\n\n");
    }
    out
}
