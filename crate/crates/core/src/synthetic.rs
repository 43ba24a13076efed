//! Planted-topic corpora for end-to-end checks.
//!
//! Word embeddings are clustered: every word belongs to one topic and its
//! embedding is `m_v * c_k + noise`, with `c_k` orthonormal topic directions
//! and magnitudes `m_v` spread evenly over `[0.5, 1.5]` within a cluster.
//! The planted topic-word distributions are `softmax(rho . (scale * c_k))`,
//! so they are exactly representable by the model, and documents are drawn
//! from a sparse Dirichlet mixture of them.

use std::fmt::Write as _;

use ndarray::{Array1, Array2};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Poisson, StandardNormal};

use crate::corpus::{BowDocument, Corpus, Vocabulary};
use crate::embeddings::{EmbeddingMatrix, EmbeddingTable};
use crate::error::Result;
use crate::etm::{compute_beta, TopicWordDist};
use crate::evaluation::TopicTopWords;
use crate::supervision::ReferenceTopics;

const TOPIC_NAMES: [&str; 12] = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india",
    "juliett", "kilo", "lima",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedSpec {
    pub topics: usize,
    pub vocab: usize,
    pub dim: usize,
    pub docs: usize,
    pub mean_doc_len: f64,
    pub doc_concentration: f64,
    pub topic_scale: f64,
    pub word_noise: f64,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            topics: 5,
            vocab: 200,
            dim: 16,
            docs: 2000,
            mean_doc_len: 60.0,
            doc_concentration: 0.1,
            topic_scale: 4.0,
            word_noise: 0.1,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedModel {
    pub corpus: Corpus,
    /// Word vectors plus one vector per topic name.
    pub table: EmbeddingTable,
    pub rho: EmbeddingMatrix,
    pub beta: TopicWordDist,
    pub alpha: Array2<f64>,
    pub names: Vec<String>,
    pub name_vectors: Vec<Vec<f64>>,
    pub word_topic: Vec<usize>,
}

pub fn word_name(i: usize) -> String {
    let letter = |x: usize| char::from(b'a' + (x % 26) as u8);
    format!("w{}{}{}", letter(i / 676), letter(i / 26), letter(i))
}

pub fn topic_name(k: usize) -> String {
    match TOPIC_NAMES.get(k) {
        Some(n) => (*n).to_owned(),
        None => format!("topic{}", word_name(k).trim_start_matches('w')),
    }
}

fn orthonormal_directions<R: Rng>(k: usize, dim: usize, rng: &mut R) -> Vec<Array1<f64>> {
    let mut out: Vec<Array1<f64>> = Vec::with_capacity(k);
    while out.len() < k {
        let mut v: Array1<f64> = Array1::from_shape_fn(dim, |_| rng.sample(StandardNormal));
        if out.len() < dim {
            for u in &out {
                let proj = v.dot(u);
                v.scaled_add(-proj, u);
            }
        }
        let norm = v.dot(&v).sqrt();
        if norm > 1e-6 {
            out.push(v / norm);
        }
    }
    out
}

pub fn generate(spec: &PlantedSpec) -> Result<PlantedModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.topics;
    let centers = orthonormal_directions(k, spec.dim, &mut rng);

    let word_topic: Vec<usize> = (0..spec.vocab).map(|v| v % k).collect();
    let mut rho = Array2::zeros((spec.vocab, spec.dim));
    for t in 0..k {
        let members: Vec<usize> = (0..spec.vocab).filter(|&v| word_topic[v] == t).collect();
        let span = (members.len().max(2) - 1) as f64;
        for (rank, &v) in members.iter().enumerate() {
            let magnitude = 1.5 - rank as f64 / span;
            let noise: Array1<f64> =
                Array1::from_shape_fn(spec.dim, |_| spec.word_noise * rng.sample::<f64, _>(StandardNormal));
            rho.row_mut(v).assign(&(&centers[t] * magnitude + noise));
        }
    }
    let rho = EmbeddingMatrix::from_matrix(rho);

    let mut alpha = Array2::zeros((k, spec.dim));
    for (t, c) in centers.iter().enumerate() {
        alpha.row_mut(t).assign(&(c * spec.topic_scale));
    }
    let beta = compute_beta(&alpha, &rho)?;

    let names: Vec<String> = (0..k).map(topic_name).collect();
    let name_vectors: Vec<Vec<f64>> = (0..k)
        .map(|t| {
            let mut acc = vec![0.0; spec.dim];
            let mut n = 0.0;
            for v in (0..spec.vocab).filter(|&v| word_topic[v] == t) {
                for (a, x) in acc.iter_mut().zip(rho.matrix.row(v)) {
                    *a += x;
                }
                n += 1.0;
            }
            acc.iter().map(|a| a / n).collect()
        })
        .collect();

    let words: Vec<String> = (0..spec.vocab).map(word_name).collect();
    let mut pairs: Vec<(String, Vec<f64>)> = words
        .iter()
        .cloned()
        .zip(rho.matrix.rows().into_iter().map(|r| r.to_vec()))
        .collect();
    pairs.extend(names.iter().cloned().zip(name_vectors.iter().cloned()));
    let table = EmbeddingTable::from_pairs(spec.dim, pairs)?;

    let samplers: Vec<WeightedIndex<f64>> = beta
        .beta
        .rows()
        .into_iter()
        .map(|r| WeightedIndex::new(r.iter().copied()).expect("positive weights"))
        .collect();
    let gamma = Gamma::new(spec.doc_concentration, 1.0).expect("valid concentration");
    let length = Poisson::new(spec.mean_doc_len).expect("valid mean length");
    let mut documents = Vec::with_capacity(spec.docs);
    let mut doc_freq = vec![0usize; spec.vocab];
    for d in 0..spec.docs {
        let mut theta: Vec<f64> = (0..k).map(|_| gamma.sample(&mut rng)).collect();
        let z: f64 = theta.iter().sum();
        if z > 0.0 {
            theta.iter_mut().for_each(|x| *x /= z);
        } else {
            theta = vec![1.0 / k as f64; k];
        }
        let mix = WeightedIndex::new(&theta).expect("mixture weights");
        let n = (length.sample(&mut rng) as usize).max(5);
        let mut counts = vec![0u32; spec.vocab];
        for _ in 0..n {
            let t = mix.sample(&mut rng);
            counts[samplers[t].sample(&mut rng)] += 1;
        }
        let counts: Vec<(usize, u32)> = counts
            .into_iter()
            .enumerate()
            .filter(|&(_, c)| c > 0)
            .collect();
        for &(v, _) in &counts {
            doc_freq[v] += 1;
        }
        documents.push(BowDocument {
            doc_id: (d + 1).to_string(),
            counts,
        });
    }
    // words never drawn still need a positive frequency to be a valid vocabulary entry
    let doc_freq = doc_freq.into_iter().map(|f| f.max(1)).collect();
    let corpus = Corpus::new(Vocabulary::new(words, doc_freq)?, documents)?;

    Ok(PlantedModel {
        corpus,
        table,
        rho,
        beta,
        alpha,
        names,
        name_vectors,
        word_topic,
    })
}

impl PlantedModel {
    /// Reference topics for the given planted topics, over the same
    /// vocabulary.
    pub fn reference(&self, topics: &[usize]) -> Result<ReferenceTopics> {
        ReferenceTopics::new(
            self.corpus.vocabulary().words().to_vec(),
            topics
                .iter()
                .map(|&t| (self.names[t].clone(), self.beta.beta.row(t).to_vec()))
                .collect(),
        )
    }
}

impl PlantedModel {
    /// One line per document, each word repeated by its count.
    pub fn corpus_text(&self) -> String {
        let vocab = self.corpus.vocabulary();
        let mut out = String::new();
        for doc in self.corpus.documents() {
            let mut words = Vec::new();
            for &(v, c) in &doc.counts {
                words.extend(std::iter::repeat_n(vocab.word(v), c as usize));
            }
            out.push_str(&words.join(" "));
            out.push('\n');
        }
        out
    }

    /// Embedding table in the whitespace text format, names included.
    pub fn embeddings_text(&self) -> String {
        let mut out = String::new();
        let rows = self
            .corpus
            .vocabulary()
            .words()
            .iter()
            .zip(self.rho.matrix.rows())
            .map(|(w, r)| (w.as_str(), r.to_vec()))
            .chain(
                self.names
                    .iter()
                    .map(String::as_str)
                    .zip(self.name_vectors.iter().cloned()),
            );
        for (word, vec) in rows {
            out.push_str(word);
            for x in vec {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        }
        out
    }
}

/// Minimum-cost assignment of rows to distinct columns (`rows <= cols`).
/// Returns the column assigned to each row.
pub fn hungarian(cost: &Array2<f64>) -> Vec<usize> {
    let (n, m) = cost.dim();
    assert!(n <= m, "hungarian needs rows <= cols");
    // potentials and matching are 1-based with a sentinel column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

pub fn overlap(a: &[usize], b: &[usize]) -> usize {
    a.iter().filter(|x| b.contains(x)).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopicMatch {
    pub planted: usize,
    pub learned: usize,
    pub overlap: usize,
}

/// Matches each planted topic to a distinct learned topic, maximizing the
/// total top-word overlap.
pub fn match_topics(planted: &TopicTopWords, learned: &TopicTopWords) -> Vec<TopicMatch> {
    let (n, m) = (planted.num_topics(), learned.num_topics());
    let cost = Array2::from_shape_fn((n, m), |(i, j)| {
        -(overlap(&planted.indices[i], &learned.indices[j]) as f64)
    });
    hungarian(&cost)
        .into_iter()
        .enumerate()
        .map(|(i, j)| TopicMatch {
            planted: i,
            learned: j,
            overlap: overlap(&planted.indices[i], &learned.indices[j]),
        })
        .collect()
}
