mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use topicadapt::checkpoint::Checkpoint;
use topicadapt::corpus::{BowDocument, Corpus};
use topicadapt::synthetic::{generate, PlantedModel, PlantedSpec};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_topicadapt"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn failed(out: &Output) -> String {
    assert!(!out.status.success(), "expected failure, got {:?}", out.status);
    let err = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "diagnostic is not one line: {err}");
    err
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn build_corpus_writes_vocabulary_corpus_and_drops() {
    let dir = tempfile::tempdir().unwrap();
    let text = dir.path().join("docs.txt");
    std::fs::write(&text, "the cat sat\nthe dog ran\ncats and dogs\n").unwrap();
    let out_dir = dir.path().join("out");
    let stdout = ok(&run(&["build-corpus", "--corpus-text", s(&text), "-o", s(&out_dir)]));
    assert!(stdout.contains("documents 3"), "{stdout}");
    let corpus = Corpus::load(&out_dir.join("corpus.json")).unwrap();
    assert_eq!(corpus.len(), 3);
    assert_eq!(std::fs::read_to_string(out_dir.join("drops.tsv")).unwrap(), "");

    std::fs::write(&text, "the cat sat\n?!... ---\nthe dog ran\n").unwrap();
    let again = dir.path().join("again");
    ok(&run(&["build-corpus", "--corpus-text", s(&text), "-o", s(&again)]));
    let drops = std::fs::read_to_string(again.join("drops.tsv")).unwrap();
    assert!(drops.starts_with("2\t"), "{drops}");

    let third = dir.path().join("third");
    ok(&run(&["build-corpus", "--corpus-text", s(&text), "-o", s(&third)]));
    for f in ["vocab.txt", "corpus.json", "drops.tsv"] {
        assert_eq!(std::fs::read(again.join(f)).unwrap(), std::fs::read(third.join(f)).unwrap());
    }
}

#[test]
fn build_corpus_failures_are_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = dir.path().join("docs.txt");
    std::fs::write(&text, "a b c\n1 2 3\n").unwrap();
    let err = failed(&run(&["build-corpus", "--corpus-text", s(&text), "-o", s(dir.path())]));
    assert!(err.contains("no token survived"), "{err}");
    let err = failed(&run(&["build-corpus", "--corpus-text", "/nonexistent/x.txt", "-o", s(dir.path())]));
    assert!(err.contains("/nonexistent/x.txt"), "{err}");
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    model: PlantedModel,
    files: common::PlantedFiles,
}

fn fixture(supervised: &[usize], discovery: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let model = generate(&PlantedSpec {
        docs: 400,
        seed: 13,
        ..Default::default()
    })
    .unwrap();
    let files = common::write_planted(&model, &root.join("data"), supervised, discovery);
    Fixture {
        _dir: dir,
        root,
        model,
        files,
    }
}

fn write_config(f: &Fixture, name: &str, extra: &str) -> PathBuf {
    let path = f.root.join(name);
    // paths relative to the config file's directory
    let text = format!(
        "[paths]\ncorpus = \"data/corpus.json\"\nembeddings = \"data/embeddings.txt\"\nreference = \"data/reference.json\"\nsoft_labels = \"data/soft_labels.csv\"\ntopic_config = \"data/topics.toml\"\noutput_dir = \"run\"\n\n[train]\nepochs = 40\nhidden_width = 32\nseed = 3\n{extra}"
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn train_topics_eval_and_infer() {
    let f = fixture(&[0, 1, 2, 3], 1);
    let cfg = write_config(&f, "run.toml", "");
    let run_dir = f.root.join("run");
    let stdout = ok(&run(&["--config", s(&cfg), "train"]));
    assert!(stdout.starts_with("epoch 40 objective"), "{stdout}");

    let history = std::fs::read_to_string(run_dir.join("history.csv")).unwrap();
    let lines: Vec<&str> = history.lines().collect();
    assert_eq!(lines[0], "epoch,elbo,r_beta,r_theta,r_gamma,objective");
    assert_eq!(lines.len(), 41);

    // the echoed config reproduces the run's inputs from anywhere
    let echoed = run_dir.join("config.toml");
    let table = ok(&run(&["--config", s(&echoed), "topics", "-n", "5"]));
    let rows: Vec<Vec<&str>> = table.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 5);
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row[0], k.to_string());
        assert_eq!(row[3].split(' ').count(), 5);
    }
    assert_eq!(rows[0][1..3], ["alpha", "adapted"]);
    assert_eq!(rows[4][1..3], ["topic_4", "discovered"]);

    let report = ok(&run(&["--config", s(&echoed), "eval", "--json"]));
    let v: serde_json::Value = serde_json::from_str(&report).unwrap();
    let (tc, td, tq) = (v["tc"].as_f64().unwrap(), v["td"].as_f64().unwrap(), v["tq"].as_f64().unwrap());
    assert!(tc.is_finite() && td.is_finite());
    assert_eq!(tq, tc * td);
    let first = std::fs::read(run_dir.join("eval.json")).unwrap();
    ok(&run(&["--config", s(&echoed), "eval"]));
    assert_eq!(std::fs::read(run_dir.join("eval.json")).unwrap(), first);

    ok(&run(&["--config", s(&echoed), "infer-theta"]));
    let theta = std::fs::read_to_string(run_dir.join("theta.csv")).unwrap();
    let mut lines = theta.lines();
    assert_eq!(lines.next().unwrap(), "doc_id,alpha,bravo,charlie,delta,topic_4");
    let mut rows = 0;
    for line in lines {
        let sum: f64 = line.split(',').skip(1).map(|x| x.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-9);
        rows += 1;
    }
    assert_eq!(rows, 400);
    ok(&run(&["--config", s(&echoed), "infer-theta"]));
    assert_eq!(std::fs::read_to_string(run_dir.join("theta.csv")).unwrap(), theta);

    // documents made of one planted topic's top words land on that topic
    let vocab = f.model.corpus.vocabulary();
    let top = topicadapt::evaluation::top_words(&f.model.beta, vocab, 10).unwrap();
    let docs: Vec<BowDocument> = (0..4)
        .map(|k| BowDocument {
            doc_id: format!("probe{k}"),
            counts: {
                let mut c: Vec<(usize, u32)> = top.indices[k].iter().map(|&v| (v, 3)).collect();
                c.sort_unstable();
                c
            },
        })
        .collect();
    let probe = Corpus::new(vocab.clone(), docs).unwrap();
    let probe_path = f.root.join("probe.json");
    probe.save(&probe_path).unwrap();
    let probe_out = f.root.join("probe_out");
    ok(&run(&["--config", s(&echoed), "infer-theta", "--corpus", s(&probe_path), "-o", s(&probe_out)]));
    let theta = std::fs::read_to_string(probe_out.join("theta.csv")).unwrap();
    for (k, line) in theta.lines().skip(1).enumerate() {
        let row: Vec<f64> = line.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        let argmax = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        assert_eq!(argmax, k, "{line}");
    }
}

#[test]
fn plain_run_records_zero_regularizers() {
    let f = fixture(&[], 0);
    let out = f.root.join("plain");
    ok(&run(&[
        "train",
        "--corpus",
        s(&f.files.corpus),
        "--embeddings",
        s(&f.files.embeddings),
        "-k",
        "5",
        "--gamma-beta",
        "0",
        "--gamma-theta",
        "0",
        "--gamma-gamma",
        "0",
        "--epochs",
        "2",
        "--hidden-width",
        "8",
        "-o",
        s(&out),
    ]));
    let history = std::fs::read_to_string(out.join("history.csv")).unwrap();
    for line in history.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[2..5], ["0", "0", "0"]);
        assert_eq!(cols[1], cols[5]);
    }
}

#[test]
fn missing_soft_labels_fail_before_training() {
    let f = fixture(&[0, 1], 1);
    let cfg = write_config(&f, "run.toml", "");
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("soft_labels = \"data/soft_labels.csv\"\n", "");
    std::fs::write(&cfg, text).unwrap();
    let err = failed(&run(&["--config", s(&cfg), "train"]));
    assert!(err.contains("soft_labels"), "{err}");
    assert!(!f.root.join("run").exists());

    let err = failed(&run(&["--config", s(&cfg), "train", "--soft-labels", "/no/such/labels.csv"]));
    assert!(err.contains("/no/such/labels.csv"), "{err}");
}

#[test]
fn pseudo_labels_feed_training() {
    let f = fixture(&[0, 1], 1);
    let labels_dir = f.root.join("labels");
    let stdout = ok(&run(&[
        "pseudo-labels",
        "--corpus",
        s(&f.files.corpus),
        "--embeddings",
        s(&f.files.embeddings),
        "--topic-config",
        s(&f.files.topic_config),
        "-o",
        s(&labels_dir),
    ]));
    assert!(stdout.contains("400 documents x 2 topics"), "{stdout}");
    let csv_path = labels_dir.join("soft_labels.csv");
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("doc_id,alpha,bravo\n"));
    for line in csv.lines().skip(1) {
        let sum: f64 = line.split(',').skip(1).map(|x| x.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }
    let cfg = write_config(&f, "run.toml", "");
    ok(&run(&["--config", s(&cfg), "train", "--soft-labels", s(&csv_path), "--epochs", "1"]));
}

#[test]
fn damaged_or_foreign_checkpoints_are_rejected() {
    let f = fixture(&[], 0);
    let out = f.root.join("run");
    let common_args = [
        "--corpus",
        s(&f.files.corpus),
        "--embeddings",
        s(&f.files.embeddings),
        "-o",
        s(&out),
    ];
    let mut train_args = vec!["train", "-k", "3", "--epochs", "1", "--hidden-width", "8"];
    train_args.extend(common_args);
    ok(&run(&train_args));

    let ckpt = out.join("checkpoint.bin");
    let good = std::fs::read(&ckpt).unwrap();
    let mut bad = good.clone();
    bad[100] ^= 0x40;
    std::fs::write(&ckpt, &bad).unwrap();
    let mut args = vec!["topics"];
    args.extend(common_args);
    let err = failed(&run(&args));
    assert!(err.contains("checksum"), "{err}");

    let mut bad = good.clone();
    bad[8] = 7;
    std::fs::write(&ckpt, &bad).unwrap();
    let err = failed(&run(&args));
    assert!(err.contains("version"), "{err}");

    std::fs::write(&ckpt, &good).unwrap();
    let other = generate(&PlantedSpec {
        docs: 20,
        vocab: 60,
        seed: 1,
        ..Default::default()
    })
    .unwrap();
    let other_corpus = f.root.join("other.json");
    other.corpus.save(&other_corpus).unwrap();
    let err = failed(&run(&["infer-theta", "--corpus", s(&other_corpus), "--embeddings", s(&f.files.embeddings), "-o", s(&out)]));
    assert!(err.contains("vocabulary hash mismatch"), "{err}");
}

#[test]
fn eval_edge_cases() {
    let f = fixture(&[], 0);
    let out = f.root.join("run");
    // identical topic rows give diversity 1/K
    let ckpt = out.join("checkpoint.bin");
    let mut params = topicadapt::etm::ModelParams::zeros(topicadapt::etm::ModelDims {
        topics: 4,
        vocab: f.model.corpus.vocab_size(),
        embedding: 16,
        hidden: 4,
    });
    for mut row in params.alpha.rows_mut() {
        row.assign(&f.model.alpha.row(0));
    }
    Checkpoint {
        params,
        vocab_hash: f.model.corpus.vocabulary().content_hash(),
    }
    .save(&ckpt)
    .unwrap();
    let args = ["eval", "--json", "--corpus", s(&f.files.corpus), "--embeddings", s(&f.files.embeddings), "-o", s(&out)];
    let v: serde_json::Value = serde_json::from_str(&ok(&run(&args))).unwrap();
    assert_eq!(v["td"].as_f64().unwrap(), 0.25);

    // a vocabulary smaller than the diversity list length
    let tiny = generate(&PlantedSpec {
        topics: 2,
        vocab: 12,
        docs: 10,
        ..Default::default()
    })
    .unwrap();
    let tiny_dir = f.root.join("tiny");
    let files = common::write_planted(&tiny, &tiny_dir, &[], 0);
    ok(&run(&["train", "-k", "2", "--epochs", "1", "--hidden-width", "4", "--corpus", s(&files.corpus), "--embeddings", s(&files.embeddings), "-o", s(&tiny_dir)]));
    let err = failed(&run(&["eval", "--corpus", s(&files.corpus), "--embeddings", s(&files.embeddings), "-o", s(&tiny_dir)]));
    assert!(err.contains("top-25 lists need at least 25 vocabulary words, have 12"), "{err}");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[train]\nepoch = 3\n").unwrap();
    let err = failed(&run(&["--config", s(&cfg), "train"]));
    assert!(err.contains("epoch"), "{err}");
}
