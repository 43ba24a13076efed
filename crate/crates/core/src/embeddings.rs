//! Pretrained word embeddings and the fixed embedding matrices built from
//! them (one for the target vocabulary, one for the reference vocabulary).

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, Vocabulary};
use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    /// Builds a table from `(token, vector)` pairs. Duplicates keep the
    /// first occurrence.
    pub fn from_pairs<I>(dim: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be at least 1".into()));
        }
        let mut vectors = HashMap::new();
        for (i, (token, v)) in pairs.into_iter().enumerate() {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    line: i + 1,
                    expected: dim,
                    found: v.len(),
                });
            }
            vectors.entry(token).or_insert(v);
        }
        Ok(EmbeddingTable { dim, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Parses word2vec-style text: `token v1 ... vL` per line, with an
    /// optional leading `count dim` header.
    pub fn parse(text: &str) -> Result<Self> {
        Self::read(text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut dim: Option<usize> = None;
        let mut vectors: HashMap<String, Vec<f64>> = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<embeddings>", e))?;
            let lineno = i + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if lineno == 1
                && fields.len() == 2
                && fields.iter().all(|f| f.parse::<u64>().is_ok())
            {
                continue;
            }
            let values = fields[1..]
                .iter()
                .map(|f| {
                    f.parse::<f64>().map_err(|_| Error::Parse {
                        line: lineno,
                        message: format!("non-numeric embedding value {f:?}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.iter().any(|x| !x.is_finite()) {
                return Err(Error::Parse {
                    line: lineno,
                    message: "non-finite embedding value".into(),
                });
            }
            let expected = *dim.get_or_insert(values.len());
            if values.len() != expected || expected == 0 {
                return Err(Error::DimensionMismatch {
                    line: lineno,
                    expected,
                    found: values.len(),
                });
            }
            vectors.entry(fields[0].to_owned()).or_insert(values);
        }
        let dim = dim.ok_or_else(|| Error::Parse {
            line: 0,
            message: "embedding file has no entries".into(),
        })?;
        Ok(EmbeddingTable { dim, vectors })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    Zero,
    #[default]
    DeterministicRandom,
}

/// Fixed `V x L` matrix, row `v` = embedding of vocabulary word `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub matrix: Array2<f64>,
    /// Fraction of the vocabulary found in the table.
    pub coverage: f64,
}

impl EmbeddingMatrix {
    pub fn from_matrix(matrix: Array2<f64>) -> Self {
        EmbeddingMatrix {
            matrix,
            coverage: 1.0,
        }
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn checksum(&self) -> u64 {
        let bytes: Vec<u8> = self.matrix.iter().flat_map(|x| x.to_le_bytes()).collect();
        fsutil::hash64(&bytes)
    }
}

const RANDOM_ROW_SCALE: f64 = 0.1;

fn random_row(word: &str, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(fsutil::hash64(word.as_bytes()));
    (0..dim)
        .map(|_| rng.random_range(-RANDOM_ROW_SCALE..=RANDOM_ROW_SCALE))
        .collect()
}

pub fn embedding_matrix_for(
    words: &[String],
    table: &EmbeddingTable,
    policy: MissingPolicy,
) -> EmbeddingMatrix {
    let dim = table.dim();
    let mut matrix = Array2::zeros((words.len(), dim));
    let mut found = 0usize;
    for (v, word) in words.iter().enumerate() {
        let row = match table.get(word) {
            Some(vec) => {
                found += 1;
                vec.to_vec()
            }
            None => match policy {
                MissingPolicy::Zero => vec![0.0; dim],
                MissingPolicy::DeterministicRandom => random_row(word, dim),
            },
        };
        matrix.row_mut(v).assign(&Array1::from(row));
    }
    let coverage = if words.is_empty() {
        1.0
    } else {
        found as f64 / words.len() as f64
    };
    EmbeddingMatrix { matrix, coverage }
}

pub fn vocabulary_matrix(
    vocab: &Vocabulary,
    table: &EmbeddingTable,
    policy: MissingPolicy,
) -> EmbeddingMatrix {
    embedding_matrix_for(vocab.words(), table, policy)
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (nu.sqrt() * nv.sqrt()))
}

/// Mean embedding of the name's tokens that appear in the table, or the
/// zero vector when none does.
pub fn name_embedding(surface_name: &str, table: &EmbeddingTable) -> Vec<f64> {
    let mut acc = vec![0.0; table.dim()];
    let mut n = 0usize;
    for token in tokenize(surface_name) {
        if let Some(v) = table.get(&token) {
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x;
            }
            n += 1;
        }
    }
    if n > 0 {
        for a in &mut acc {
            *a /= n as f64;
        }
    }
    acc
}
