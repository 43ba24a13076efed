//! Guided neural topic modelling on top of frozen word embeddings.
//!
//! Topics can be steered by reference topic-word distributions, by topic
//! names, and by per-document soft labels; unsupervised topics are learned
//! alongside the guided ones.

pub mod checkpoint;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod etm;
pub mod evaluation;
mod fsutil;
pub mod supervision;
pub mod pipeline;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
pub use fsutil::{read_to_string, write_atomic};
