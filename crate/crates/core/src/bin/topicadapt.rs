use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use topicadapt::embeddings::MissingPolicy;
use topicadapt::pipeline::{self, RunConfig};
use topicadapt::Result;

/// Guided embedded topic modelling.
#[derive(Parser)]
#[command(name = "topicadapt", version)]
struct Cli {
    /// Run config (TOML); flags override its values.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the vocabulary and bag-of-words corpus from raw text.
    BuildCorpus {
        #[command(flatten)]
        paths: PathArgs,
        #[arg(long)]
        min_df: Option<usize>,
        #[arg(long)]
        max_df_frac: Option<f64>,
        /// Stopword file, one word per line.
        #[arg(long)]
        stopwords: Option<PathBuf>,
    },
    /// Train a model and write the checkpoint and per-epoch history.
    Train {
        #[command(flatten)]
        paths: PathArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Print the top words of each topic.
    Topics {
        #[command(flatten)]
        paths: PathArgs,
        /// Words per topic.
        #[arg(short = 'n', long)]
        top_n: Option<usize>,
    },
    /// Report topic coherence, diversity, and quality.
    Eval {
        #[command(flatten)]
        paths: PathArgs,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Write embedding-similarity soft labels for the named topics.
    PseudoLabels {
        #[command(flatten)]
        paths: PathArgs,
    },
    /// Write per-document topic proportions.
    InferTheta {
        #[command(flatten)]
        paths: PathArgs,
    },
}

#[derive(Args)]
struct PathArgs {
    #[arg(long)]
    corpus_text: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    soft_labels: Option<PathBuf>,
    #[arg(long)]
    topic_config: Option<PathBuf>,
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_parser = parse_policy)]
    missing_policy: Option<MissingPolicy>,
}

#[derive(Args)]
struct TrainArgs {
    /// Number of topics when no topic config is given.
    #[arg(short, long)]
    k: Option<usize>,
    #[arg(long)]
    gamma_beta: Option<f64>,
    #[arg(long)]
    gamma_theta: Option<f64>,
    #[arg(long)]
    gamma_gamma: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    hidden_width: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_policy(s: &str) -> std::result::Result<MissingPolicy, String> {
    match s {
        "zero" => Ok(MissingPolicy::Zero),
        "deterministic-random" => Ok(MissingPolicy::DeterministicRandom),
        _ => Err("expected zero or deterministic-random".into()),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

impl PathArgs {
    fn apply(self, cfg: &mut RunConfig) {
        let p = &mut cfg.paths;
        set_opt(&mut p.corpus_text, self.corpus_text);
        set_opt(&mut p.corpus, self.corpus);
        set_opt(&mut p.embeddings, self.embeddings);
        set_opt(&mut p.reference, self.reference);
        set_opt(&mut p.soft_labels, self.soft_labels);
        set_opt(&mut p.topic_config, self.topic_config);
        set_opt(&mut p.output_dir, self.output_dir);
        set_opt(&mut p.checkpoint, self.checkpoint);
        set(&mut cfg.embeddings.missing_policy, self.missing_policy);
    }
}

impl TrainArgs {
    fn apply(self, cfg: &mut RunConfig) {
        let t = &mut cfg.train;
        set_opt(&mut t.k_total, self.k);
        set(&mut t.gamma_beta, self.gamma_beta);
        set(&mut t.gamma_theta, self.gamma_theta);
        set(&mut t.gamma_gamma, self.gamma_gamma);
        set(&mut t.epochs, self.epochs);
        set(&mut t.batch_size, self.batch_size);
        set(&mut t.learning_rate, self.learning_rate);
        set(&mut t.hidden_width, self.hidden_width);
        set(&mut t.seed, self.seed);
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::BuildCorpus {
            paths,
            min_df,
            max_df_frac,
            stopwords,
        } => {
            paths.apply(&mut cfg);
            set(&mut cfg.corpus.min_df, min_df);
            set(&mut cfg.corpus.max_df_frac, max_df_frac);
            set_opt(&mut cfg.corpus.stopwords, stopwords);
            let s = pipeline::build_corpus(&cfg)?;
            println!("V {} documents {} dropped {}", s.vocab_size, s.documents, s.dropped);
        }
        Command::Train { paths, train } => {
            paths.apply(&mut cfg);
            train.apply(&mut cfg);
            let s = pipeline::train(&cfg)?;
            let r = s.last;
            println!(
                "epoch {} objective {:.6} elbo {:.6} r_beta {:.6} r_theta {:.6} r_gamma {:.6}",
                r.epoch, r.objective, r.elbo, r.r_beta, r.r_theta, r.r_gamma
            );
            println!("checkpoint {}", s.checkpoint.display());
        }
        Command::Topics { paths, top_n } => {
            paths.apply(&mut cfg);
            let n = top_n.unwrap_or(cfg.eval.report_top_n);
            print!("{}", pipeline::topics(&cfg, n)?);
        }
        Command::Eval { paths, json } => {
            paths.apply(&mut cfg);
            let report = pipeline::eval(&cfg)?;
            if json {
                print!("{}", report.to_json());
            } else {
                print!("{}", report.to_table());
            }
        }
        Command::PseudoLabels { paths } => {
            paths.apply(&mut cfg);
            let (labels, path) = pipeline::pseudo_labels(&cfg)?;
            println!(
                "{} documents x {} topics -> {}",
                labels.doc_ids.len(),
                labels.names.len(),
                path.display()
            );
        }
        Command::InferTheta { paths } => {
            paths.apply(&mut cfg);
            let (theta, path) = pipeline::infer_theta(&cfg)?;
            println!("{} documents -> {}", theta.nrows(), path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg: Vec<String> = e
                .to_string()
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_owned)
                .collect();
            eprintln!("error: {}", msg.join(" "));
            ExitCode::FAILURE
        }
    }
}
