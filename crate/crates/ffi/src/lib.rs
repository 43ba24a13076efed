//! C interface to topicadapt.
//!
//! Every function returns a `TaStatus`. On failure a message is kept per
//! thread and can be read with `ta_last_error_message` until the next call
//! on that thread. Models are opaque handles released with `ta_model_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use ndarray::Array2;
use topicadapt::checkpoint::Checkpoint;
use topicadapt::etm::{encode, softmax, ModelParams};
use topicadapt::pipeline::{self, RunConfig};
use topicadapt::supervision::{kl_divergence, sharpen_soft_labels, SoftLabelMatrix};
use topicadapt::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Checkpoint = 5,
    VocabularyMismatch = 6,
    Config = 7,
    Numeric = 8,
    Panic = 9,
}

/// A trained model loaded from a checkpoint.
pub struct TaModel {
    params: ModelParams,
    vocab_hash: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean = msg.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).unwrap_or_default());
}

fn status_of(err: &Error) -> TaStatus {
    match err {
        Error::Io { .. } => TaStatus::Io,
        Error::Format { .. } | Error::Parse { .. } => TaStatus::Format,
        Error::Checkpoint(_) => TaStatus::Checkpoint,
        Error::VocabularyMismatch { .. } => TaStatus::VocabularyMismatch,
        Error::Config(_) => TaStatus::Config,
        Error::NonFiniteLoss { .. } | Error::RenormalizationUnderflow { .. } => TaStatus::Numeric,
        _ => TaStatus::InvalidArgument,
    }
}

struct Fail(TaStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(TaStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(TaStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TaStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TaStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            TaStatus::Panic
        }
    }
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))?;
    Ok(Path::new(s))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut_arg<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ta_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or "" after a
/// successful one. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn ta_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a checkpoint. On success `*out` owns a new model.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ta_model_load(path: *const c_char, out: *mut *mut TaModel) -> TaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = std::ptr::null_mut();
        let ck = Checkpoint::load(path_arg(path, "path")?)?;
        let model = TaModel {
            params: ck.params,
            vocab_hash: ck.vocab_hash,
        };
        *out = Box::into_raw(Box::new(model));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from `ta_model_load` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ta_model_free(model: *mut TaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Writes topic count, vocabulary size, embedding width and hidden width.
/// Any output pointer may be null.
///
/// # Safety
/// `model` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ta_model_dims(
    model: *const TaModel,
    topics: *mut usize,
    vocab: *mut usize,
    embedding: *mut usize,
    hidden: *mut usize,
) -> TaStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let d = m.params.dims();
        for (p, v) in [(topics, d.topics), (vocab, d.vocab), (embedding, d.embedding), (hidden, d.hidden)] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Hash of the vocabulary the model was trained on.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ta_model_vocab_hash(model: *const TaModel, out: *mut u64) -> TaStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = m.vocab_hash;
        Ok(())
    })
}

/// Topic proportions for one document given as dense word counts over the
/// model vocabulary. `theta_out` receives `topics` values.
///
/// # Safety
/// `counts` must hold `vocab` values and `theta_out` room for `topics`.
#[no_mangle]
pub unsafe extern "C" fn ta_model_infer_theta(
    model: *const TaModel,
    counts: *const f64,
    vocab: usize,
    theta_out: *mut f64,
    topics: usize,
) -> TaStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let d = m.params.dims();
        if vocab != d.vocab || topics != d.topics {
            return Err(invalid(format!(
                "model is {} topics over {} words, got {topics} and {vocab}",
                d.topics, d.vocab
            )));
        }
        let counts = slice_arg(counts, vocab, "counts")?;
        let out = slice_mut_arg(theta_out, topics, "theta_out")?;
        if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(invalid("counts must be finite and non-negative"));
        }
        let total: f64 = counts.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroTotal.into());
        }
        let x: Vec<f64> = counts.iter().map(|c| c / total).collect();
        let (mu, _) = encode(&x, &m.params)?;
        out.copy_from_slice(&softmax(&mu));
        Ok(())
    })
}

/// `KL(p || q)` for two distributions of length `n`.
///
/// # Safety
/// `p` and `q` must hold `n` values and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn ta_kl_divergence(p: *const f64, q: *const f64, n: usize, out: *mut f64) -> TaStatus {
    guard(|| {
        let p = slice_arg(p, n, "p")?;
        let q = slice_arg(q, n, "q")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = kl_divergence(p, q)?;
        Ok(())
    })
}

/// Sharpens a row-major `docs x topics` soft-label matrix into `out`
/// (same shape).
///
/// # Safety
/// `labels` and `out` must each hold `docs * topics` values.
#[no_mangle]
pub unsafe extern "C" fn ta_sharpen_soft_labels(
    labels: *const f64,
    docs: usize,
    topics: usize,
    out: *mut f64,
) -> TaStatus {
    guard(|| {
        let len = docs
            .checked_mul(topics)
            .ok_or_else(|| invalid("matrix size overflows"))?;
        if len == 0 {
            return Err(invalid("matrix is empty"));
        }
        let src = slice_arg(labels, len, "labels")?;
        let dst = slice_mut_arg(out, len, "out")?;
        let p = Array2::from_shape_vec((docs, topics), src.to_vec())
            .map_err(|e| invalid(e.to_string()))?;
        let names = (0..topics).map(|k| k.to_string()).collect();
        let ids = (1..=docs).map(|d| d.to_string()).collect();
        let matrix = SoftLabelMatrix::new(names, ids, p)?;
        let sharp = sharpen_soft_labels(&matrix)?;
        for (o, v) in dst.iter_mut().zip(sharp.theta_t.iter()) {
            *o = *v;
        }
        Ok(())
    })
}

/// Runs training from a TOML run config, as the `train` command does.
///
/// # Safety
/// `config_path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ta_train(config_path: *const c_char) -> TaStatus {
    guard(|| {
        let cfg = RunConfig::load(path_arg(config_path, "config_path")?)?;
        pipeline::train(&cfg)?;
        Ok(())
    })
}

/// Evaluates the model named by a run config. Writes coherence, diversity
/// and quality; any output pointer may be null.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; non-null outputs writable.
#[no_mangle]
pub unsafe extern "C" fn ta_eval(
    config_path: *const c_char,
    coherence: *mut f64,
    diversity: *mut f64,
    quality: *mut f64,
) -> TaStatus {
    guard(|| {
        let cfg = RunConfig::load(path_arg(config_path, "config_path")?)?;
        let r = pipeline::eval(&cfg)?;
        for (p, v) in [(coherence, r.tc), (diversity, r.td), (quality, r.tq)] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}
