//! Corpus ingestion: tokenization, vocabulary construction and sparse
//! bag-of-words vectorization.
//!
//! Documents are rows of the corpus in input order. That order is the row
//! index used by soft-label files, so it is never reshuffled here.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

/// Lowercased alphabetic runs of at least two characters. Everything else
/// (digits, punctuation, whitespace) separates tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut chars = 0usize;
    let mut flush = |current: &mut String, chars: &mut usize| {
        if *chars >= 2 {
            tokens.push(std::mem::take(current));
        } else {
            current.clear();
        }
        *chars = 0;
    };
    for c in text.chars() {
        if c.is_alphabetic() {
            current.extend(c.to_lowercase());
            chars += 1;
        } else {
            flush(&mut current, &mut chars);
        }
    }
    flush(&mut current, &mut chars);
    tokens
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    words: Vec<String>,
    doc_freq: Vec<usize>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    words: Vec<String>,
    doc_freq: Vec<usize>,
}

impl TryFrom<VocabularyRepr> for Vocabulary {
    type Error = Error;

    fn try_from(repr: VocabularyRepr) -> Result<Self> {
        Vocabulary::new(repr.words, repr.doc_freq)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            words: v.words,
            doc_freq: v.doc_freq,
        }
    }
}

impl Vocabulary {
    pub fn new(words: Vec<String>, doc_freq: Vec<usize>) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        if words.len() != doc_freq.len() {
            return Err(Error::DimMismatch(format!(
                "{} words but {} document frequencies",
                words.len(),
                doc_freq.len()
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary word {w:?}")));
            }
        }
        Ok(Vocabulary {
            words,
            doc_freq,
            index,
        })
    }

    /// Vocabulary with unit document frequencies, for callers that only
    /// need the word list.
    pub fn from_words(words: Vec<String>) -> Result<Self> {
        let n = words.len();
        Vocabulary::new(words, vec![1; n])
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, index: usize) -> &str {
        &self.words[index]
    }

    pub fn doc_freq(&self) -> &[usize] {
        &self.doc_freq
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Content hash of the ordered word list; stored in checkpoints to catch
    /// vocabulary drift between training and inference.
    pub fn content_hash(&self) -> u64 {
        fsutil::hash64(self.words.join("\n").as_bytes())
    }

    /// One token per line, line number = index.
    pub fn export_text(&self) -> String {
        let mut out = String::new();
        for w in &self.words {
            out.push_str(w);
            out.push('\n');
        }
        out
    }

    pub fn load_text(path: &Path) -> Result<Self> {
        let text = fsutil::read_to_string(path)?;
        let words: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect();
        Vocabulary::from_words(words)
    }
}

/// Retains tokens whose document frequency lies in
/// `[min_df, max_df_frac * |D|]` and that are not stopwords. Ordered by
/// descending document frequency, ties broken lexicographically.
pub fn build_vocabulary(
    token_docs: &[Vec<String>],
    min_df: usize,
    max_df_frac: f64,
    stopwords: &HashSet<String>,
) -> Result<Vocabulary> {
    if min_df < 1 {
        return Err(Error::Config("min_df must be at least 1".into()));
    }
    if !(max_df_frac > 0.0 && max_df_frac <= 1.0) {
        return Err(Error::Config(format!(
            "max_df_frac must lie in (0, 1], got {max_df_frac}"
        )));
    }
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in token_docs {
        let distinct: HashSet<&str> = doc.iter().map(String::as_str).collect();
        for t in distinct {
            *df.entry(t).or_default() += 1;
        }
    }
    let max_df = max_df_frac * token_docs.len() as f64;
    let mut kept: Vec<(&str, usize)> = df
        .into_iter()
        .filter(|&(t, n)| n >= min_df && (n as f64) <= max_df && !stopwords.contains(t))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let (words, freqs) = kept.into_iter().map(|(t, n)| (t.to_owned(), n)).unzip();
    Vocabulary::new(words, freqs)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BowDocument {
    pub doc_id: String,
    /// `(vocabulary index, count)` pairs, sorted by index, counts >= 1.
    pub counts: Vec<(usize, u32)>,
}

impl BowDocument {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&(_, c)| u64::from(c)).sum()
    }

    pub fn normalized(&self, vocab_size: usize) -> Result<Vec<f64>> {
        normalize_bow(&self.counts, vocab_size)
    }
}

/// Dense probability vector `count_v / total` over `vocab_size` entries.
pub fn normalize_bow(counts: &[(usize, u32)], vocab_size: usize) -> Result<Vec<f64>> {
    let total: u64 = counts.iter().map(|&(_, c)| u64::from(c)).sum();
    if total == 0 {
        return Err(Error::ZeroTotal);
    }
    let mut dense = vec![0.0; vocab_size];
    for &(v, c) in counts {
        if v >= vocab_size {
            return Err(Error::DimMismatch(format!(
                "word index {v} outside vocabulary of size {vocab_size}"
            )));
        }
        dense[v] += f64::from(c) / total as f64;
    }
    Ok(dense)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedDocument {
    /// 1-based position in the input.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    vocabulary: Vocabulary,
    documents: Vec<BowDocument>,
}

impl Corpus {
    pub fn new(vocabulary: Vocabulary, documents: Vec<BowDocument>) -> Result<Self> {
        let v = vocabulary.len();
        for doc in &documents {
            if doc.counts.is_empty() {
                return Err(Error::ZeroTotal);
            }
            for &(idx, c) in &doc.counts {
                if idx >= v || c == 0 {
                    return Err(Error::DimMismatch(format!(
                        "document {} has entry ({idx}, {c}) for vocabulary size {v}",
                        doc.doc_id
                    )));
                }
            }
        }
        Ok(Corpus {
            vocabulary,
            documents,
        })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn documents(&self) -> &[BowDocument] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("corpus serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fsutil::read_to_string(path)?;
        let raw: Corpus =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        Corpus::new(raw.vocabulary, raw.documents)
    }
}

#[derive(Debug, Clone)]
pub struct Vectorized {
    pub corpus: Corpus,
    pub dropped: Vec<DroppedDocument>,
}

/// Counts tokens over vocabulary indices. Documents with no in-vocabulary
/// token are dropped and reported; `doc_id` is the 1-based input position.
pub fn vectorize(token_docs: &[Vec<String>], vocabulary: &Vocabulary) -> Vectorized {
    let mut documents = Vec::new();
    let mut dropped = Vec::new();
    for (pos, tokens) in token_docs.iter().enumerate() {
        let mut counts: HashMap<usize, u32> = HashMap::new();
        for t in tokens {
            if let Some(i) = vocabulary.index_of(t) {
                *counts.entry(i).or_default() += 1;
            }
        }
        if counts.is_empty() {
            let reason = if tokens.is_empty() {
                "no tokens"
            } else {
                "no in-vocabulary tokens"
            };
            dropped.push(DroppedDocument {
                line: pos + 1,
                reason: reason.to_owned(),
            });
            continue;
        }
        let mut counts: Vec<(usize, u32)> = counts.into_iter().collect();
        counts.sort_unstable();
        documents.push(BowDocument {
            doc_id: (pos + 1).to_string(),
            counts,
        });
    }
    Vectorized {
        corpus: Corpus {
            vocabulary: vocabulary.clone(),
            documents,
        },
        dropped,
    }
}

/// `<line>\t<reason>` per dropped document.
pub fn drop_report(dropped: &[DroppedDocument]) -> String {
    let mut out = String::new();
    for d in dropped {
        let _ = writeln!(out, "{}\t{}", d.line, d.reason);
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildOptions {
    pub min_df: usize,
    pub max_df_frac: f64,
    pub stopwords: Vec<String>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            min_df: 1,
            max_df_frac: 1.0,
            stopwords: Vec::new(),
        }
    }
}

/// Full text-to-corpus pipeline over one-document-per-line input.
pub fn build_from_text(text: &str, options: &BuildOptions) -> Result<Vectorized> {
    let token_docs: Vec<Vec<String>> = text.lines().map(tokenize).collect();
    let stopwords: HashSet<String> = options.stopwords.iter().cloned().collect();
    let vocab = build_vocabulary(&token_docs, options.min_df, options.max_df_frac, &stopwords)?;
    Ok(vectorize(&token_docs, &vocab))
}
