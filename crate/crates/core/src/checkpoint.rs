//! Versioned flat binary checkpoint.
//!
//! Layout, every field 64-bit little-endian:
//!
//! ```text
//! magic "TADAPTCK" | version | K | V | L | H | vocabulary hash
//! alpha (K*L, row-major)
//! hidden weights (H*V) | hidden bias (H)
//! mean head weights (K*H) | mean head bias (K)
//! log-variance head weights (K*H) | log-variance head bias (K)
//! checksum over all preceding bytes
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::etm::{ModelDims, ModelParams};
use crate::fsutil;

pub const MAGIC: &[u8; 8] = b"TADAPTCK";
pub const VERSION: u64 = 1;
const HEADER_WORDS: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub vocab_hash: u64,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let d = self.params.dims();
        let mut out = Vec::with_capacity(8 * (HEADER_WORDS + self.params.num_params() + 1));
        out.extend_from_slice(MAGIC);
        for word in [
            VERSION,
            d.topics as u64,
            d.vocab as u64,
            d.embedding as u64,
            d.hidden as u64,
            self.vocab_hash,
        ] {
            out.extend_from_slice(&word.to_le_bytes());
        }
        for t in self.params.tensors() {
            for x in t {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let sum = fsutil::hash64(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_owned());
        if bytes.len() < 8 * (HEADER_WORDS + 1) || bytes.len() % 8 != 0 {
            return Err(bad("truncated file"));
        }
        if &bytes[..8] != MAGIC {
            return Err(bad("not a topicadapt checkpoint (bad magic)"));
        }
        let word = |i: usize| {
            let mut b = [0u8; 8];
            b.copy_from_slice(&bytes[8 * i..8 * i + 8]);
            u64::from_le_bytes(b)
        };
        let version = word(1);
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {version}, expected {VERSION}"
            )));
        }
        let body_end = bytes.len() - 8;
        let stored = word(body_end / 8);
        if fsutil::hash64(&bytes[..body_end]) != stored {
            return Err(bad("checksum mismatch"));
        }
        let to_usize = |x: u64| usize::try_from(x).map_err(|_| bad("dimension overflow"));
        let dims = ModelDims {
            topics: to_usize(word(2))?,
            vocab: to_usize(word(3))?,
            embedding: to_usize(word(4))?,
            hidden: to_usize(word(5))?,
        };
        let vocab_hash = word(6);
        let mut params = ModelParams::zeros(dims);
        let expected = HEADER_WORDS + params.num_params() + 1;
        if bytes.len() / 8 != expected {
            return Err(bad("payload size does not match header dimensions"));
        }
        let mut i = HEADER_WORDS;
        for t in params.tensors_mut() {
            for x in t.iter_mut() {
                *x = f64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().expect("8 bytes"));
                i += 1;
            }
        }
        Ok(Checkpoint { params, vocab_hash })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Human-readable mirror of the binary layout.
    pub fn to_text(&self) -> String {
        let d = self.params.dims();
        let mut out = String::new();
        let _ = writeln!(out, "topicadapt-checkpoint version {VERSION}");
        let _ = writeln!(
            out,
            "K {} V {} L {} H {}",
            d.topics, d.vocab, d.embedding, d.hidden
        );
        let _ = writeln!(out, "vocab_hash {:016x}", self.vocab_hash);
        let names = [
            ("alpha", d.embedding),
            ("hidden.weight", d.vocab),
            ("hidden.bias", d.hidden),
            ("mu.weight", d.hidden),
            ("mu.bias", d.topics),
            ("log_var.weight", d.hidden),
            ("log_var.bias", d.topics),
        ];
        for ((name, width), t) in names.iter().zip(self.params.tensors()) {
            let _ = writeln!(out, "[{name}]");
            for row in t.chunks((*width).max(1)) {
                let line: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        }
        out
    }
}
