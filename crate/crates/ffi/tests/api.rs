use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use topicadapt::checkpoint::Checkpoint;
use topicadapt::etm::{ModelDims, ModelParams};
use topicadapt::synthetic::{generate, PlantedSpec};
use topicadapt_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ta_last_error_message()) }
        .to_str()
        .unwrap()
        .to_owned()
}

fn c(path: &Path) -> CString {
    CString::new(path.to_str().unwrap()).unwrap()
}

fn small_params() -> ModelParams {
    let mut p = ModelParams::zeros(ModelDims {
        topics: 3,
        vocab: 6,
        embedding: 4,
        hidden: 5,
    });
    for i in 0..p.num_params() {
        p.set(i, (i as f64 * 0.37).sin() * 0.5);
    }
    p
}

fn write_checkpoint(dir: &Path) -> (std::path::PathBuf, ModelParams) {
    let params = small_params();
    let path = dir.join("model.bin");
    Checkpoint {
        params: params.clone(),
        vocab_hash: 0xfeed_beef,
    }
    .save(&path)
    .unwrap();
    (path, params)
}

fn load(path: &Path) -> *mut TaModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ta_model_load(c(path).as_ptr(), &mut m) }, TaStatus::Ok);
    assert!(!m.is_null());
    m
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(ta_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn model_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (path, params) = write_checkpoint(dir.path());
    let m = load(&path);

    let (mut k, mut v, mut l, mut h) = (0, 0, 0, 0);
    assert_eq!(unsafe { ta_model_dims(m, &mut k, &mut v, &mut l, &mut h) }, TaStatus::Ok);
    assert_eq!((k, v, l, h), (3, 6, 4, 5));
    assert_eq!(
        unsafe { ta_model_dims(m, ptr::null_mut(), &mut v, ptr::null_mut(), ptr::null_mut()) },
        TaStatus::Ok
    );

    let mut hash = 0;
    assert_eq!(unsafe { ta_model_vocab_hash(m, &mut hash) }, TaStatus::Ok);
    assert_eq!(hash, 0xfeed_beef);

    let counts = [2.0, 0.0, 1.0, 0.0, 0.0, 5.0];
    let mut theta = [0.0; 3];
    let status = unsafe { ta_model_infer_theta(m, counts.as_ptr(), 6, theta.as_mut_ptr(), 3) };
    assert_eq!(status, TaStatus::Ok, "{}", last_error());
    assert_eq!(last_error(), "");

    // Same document through the core crate.
    let vocab = topicadapt::corpus::Vocabulary::from_words((0..6).map(|i| format!("w{i}")).collect()).unwrap();
    let doc = topicadapt::corpus::BowDocument {
        doc_id: "1".into(),
        counts: vec![(0, 2), (2, 1), (5, 5)],
    };
    let corpus = topicadapt::corpus::Corpus::new(vocab, vec![doc]).unwrap();
    let expected = topicadapt::pipeline::infer_theta_matrix(&corpus, &params).unwrap();
    for kk in 0..3 {
        assert!((theta[kk] - expected[[0, kk]]).abs() < 1e-12);
    }
    assert!((theta.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    unsafe { ta_model_free(m) };
    unsafe { ta_model_free(ptr::null_mut()) };
}

#[test]
fn infer_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _) = write_checkpoint(dir.path());
    let m = load(&path);
    let mut theta = [0.0; 3];

    let wrong = [1.0; 5];
    let s = unsafe { ta_model_infer_theta(m, wrong.as_ptr(), 5, theta.as_mut_ptr(), 3) };
    assert_eq!(s, TaStatus::InvalidArgument);
    assert!(last_error().contains("6 words"), "{}", last_error());

    let zeros = [0.0; 6];
    let s = unsafe { ta_model_infer_theta(m, zeros.as_ptr(), 6, theta.as_mut_ptr(), 3) };
    assert_eq!(s, TaStatus::InvalidArgument);
    assert!(last_error().contains("zero"), "{}", last_error());

    let negative = [1.0, -1.0, 0.0, 0.0, 0.0, 1.0];
    let s = unsafe { ta_model_infer_theta(m, negative.as_ptr(), 6, theta.as_mut_ptr(), 3) };
    assert_eq!(s, TaStatus::InvalidArgument);

    let s = unsafe { ta_model_infer_theta(m, ptr::null(), 6, theta.as_mut_ptr(), 3) };
    assert_eq!(s, TaStatus::NullPointer);
    assert!(last_error().contains("counts"));

    let s = unsafe { ta_model_infer_theta(ptr::null(), zeros.as_ptr(), 6, theta.as_mut_ptr(), 3) };
    assert_eq!(s, TaStatus::NullPointer);
    unsafe { ta_model_free(m) };
}

#[test]
fn load_failures_map_to_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = ptr::null_mut();

    let missing = dir.path().join("absent.bin");
    assert_eq!(unsafe { ta_model_load(c(&missing).as_ptr(), &mut m) }, TaStatus::Io);
    assert!(m.is_null());
    assert!(last_error().contains("absent.bin"));

    let (path, _) = write_checkpoint(dir.path());
    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    std::fs::write(&path, bytes).unwrap();
    assert_eq!(unsafe { ta_model_load(c(&path).as_ptr(), &mut m) }, TaStatus::Checkpoint);
    assert!(m.is_null());
    assert!(last_error().starts_with("checkpoint:"), "{}", last_error());

    assert_eq!(unsafe { ta_model_load(ptr::null(), &mut m) }, TaStatus::NullPointer);
    assert_eq!(unsafe { ta_model_load(c(&path).as_ptr(), ptr::null_mut()) }, TaStatus::NullPointer);
    assert_eq!(unsafe { ta_model_dims(ptr::null(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()) }, TaStatus::NullPointer);
}

#[test]
fn kl_and_sharpening() {
    let p = [0.5, 0.5];
    let q = [0.25, 0.75];
    let mut out = f64::NAN;
    assert_eq!(unsafe { ta_kl_divergence(p.as_ptr(), q.as_ptr(), 2, &mut out) }, TaStatus::Ok);
    let expected = 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln();
    assert!((out - expected).abs() < 1e-15);

    let bad = [0.5, 0.6];
    assert_eq!(
        unsafe { ta_kl_divergence(bad.as_ptr(), q.as_ptr(), 2, &mut out) },
        TaStatus::InvalidArgument
    );
    assert!(!last_error().is_empty());

    // Column sums f = (1, 1); rows square then renormalize.
    let labels = [0.8, 0.2, 0.2, 0.8];
    let mut sharp = [0.0; 4];
    assert_eq!(
        unsafe { ta_sharpen_soft_labels(labels.as_ptr(), 2, 2, sharp.as_mut_ptr()) },
        TaStatus::Ok
    );
    let hi = 0.64 / 0.68;
    let lo = 0.04 / 0.68;
    for (got, want) in sharp.iter().zip([hi, lo, lo, hi]) {
        assert!((got - want).abs() < 1e-15);
    }

    let degenerate = [0.0, 1.0, 0.0, 1.0];
    assert_eq!(
        unsafe { ta_sharpen_soft_labels(degenerate.as_ptr(), 2, 2, sharp.as_mut_ptr()) },
        TaStatus::InvalidArgument
    );
    assert!(last_error().contains("sums to zero"), "{}", last_error());
    assert_eq!(
        unsafe { ta_sharpen_soft_labels(labels.as_ptr(), 0, 2, sharp.as_mut_ptr()) },
        TaStatus::InvalidArgument
    );
}

#[test]
fn train_and_eval_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let model = generate(&PlantedSpec {
        topics: 3,
        vocab: 60,
        dim: 8,
        docs: 120,
        ..PlantedSpec::default()
    })
    .unwrap();
    model.corpus.save(&dir.path().join("corpus.json")).unwrap();
    std::fs::write(dir.path().join("embeddings.txt"), model.embeddings_text()).unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[paths]\ncorpus = \"corpus.json\"\nembeddings = \"embeddings.txt\"\noutput_dir = \"run\"\n\n\
         [train]\nk_total = 3\nepochs = 3\nhidden_width = 8\n\n[eval]\ncoherence_top_n = 5\ndiversity_top_n = 5\n",
    )
    .unwrap();

    assert_eq!(unsafe { ta_train(c(&cfg).as_ptr()) }, TaStatus::Ok, "{}", last_error());
    let m = load(&dir.path().join("run/checkpoint.bin"));
    let mut hash = 0;
    unsafe { ta_model_vocab_hash(m, &mut hash) };
    assert_eq!(hash, model.corpus.vocabulary().content_hash());
    unsafe { ta_model_free(m) };

    let (mut tc, mut td, mut tq) = (f64::NAN, f64::NAN, f64::NAN);
    assert_eq!(
        unsafe { ta_eval(c(&cfg).as_ptr(), &mut tc, &mut td, &mut tq) },
        TaStatus::Ok,
        "{}",
        last_error()
    );
    assert!((0.0..=1.0).contains(&td));
    assert!((tq - tc * td).abs() < 1e-12);

    std::fs::write(&cfg, "[train]\nepoch = 3\n").unwrap();
    assert_eq!(unsafe { ta_train(c(&cfg).as_ptr()) }, TaStatus::Format);
    assert!(last_error().contains("epoch"), "{}", last_error());
}

#[test]
fn errors_are_per_thread() {
    let mut out = 0.0;
    let p = [1.0];
    assert_eq!(unsafe { ta_kl_divergence(p.as_ptr(), ptr::null(), 1, &mut out) }, TaStatus::NullPointer);
    let other = std::thread::spawn(last_error).join().unwrap();
    assert_eq!(other, "");
    assert!(last_error().contains('q'));
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/topicadapt.h")).unwrap();
    for name in [
        "typedef struct TaModel TaModel;",
        "TA_STATUS_OK = 0",
        "TA_STATUS_PANIC = 9",
        "ta_version(void)",
        "ta_last_error_message(void)",
        "ta_model_load(",
        "ta_model_free(",
        "ta_model_dims(",
        "ta_model_vocab_hash(",
        "ta_model_infer_theta(",
        "ta_kl_divergence(",
        "ta_sharpen_soft_labels(",
        "ta_train(",
        "ta_eval(",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
