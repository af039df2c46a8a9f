use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use decvae::dsp::Method;
use decvae::metrics::ClassifierKind;
use decvae::model::Aggregation;
use decvae::simvowels::Split;
use decvae_cli::commands;
use decvae_cli::error::{CliError, CliResult};
use decvae_cli::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "decvae", version, about = "Decomposition VAE: data, training, embedding and evaluation")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a SimVowels dataset.
    GenData {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        speakers: Option<usize>,
    },
    /// Decompose one WAV file into band-limited components.
    Decompose {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
        #[arg(long)]
        components: Option<usize>,
    },
    /// Train a model on a dataset directory.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        beta_s: Option<f64>,
        /// Maximum number of epochs.
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr_z: Option<f64>,
        #[arg(long)]
        lr_s: Option<f64>,
        #[arg(long)]
        max_train: Option<usize>,
        #[arg(long)]
        max_dev: Option<usize>,
        /// Feed the original signal to every view.
        #[arg(long)]
        no_decompose: bool,
        /// Drop the divergence terms from the objective.
        #[arg(long)]
        no_contrastive: bool,
    },
    /// Embed a dataset split with a trained model.
    Embed {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_parser = parse_split)]
        split: Option<Split>,
        #[arg(long)]
        max_utterances: Option<usize>,
        #[arg(long, value_parser = parse_aggregation)]
        aggregation: Option<Aggregation>,
    },
    /// Compute disentanglement metrics and classification tasks.
    Eval {
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        factors: Option<PathBuf>,
        /// Comma-separated subset of dci,mi,gcn,modexp,irs.
        #[arg(long, value_delimiter = ',')]
        metrics: Option<Vec<String>>,
        /// Comma-separated factor columns to classify.
        #[arg(long, value_delimiter = ',')]
        task: Option<Vec<String>>,
        #[arg(long, value_parser = parse_classifier)]
        classifier: Option<ClassifierKind>,
        #[arg(long)]
        folds: Option<usize>,
        /// Comma-separated cross-validation seeds.
        #[arg(long, value_delimiter = ',')]
        cv_seeds: Option<Vec<u64>>,
    },
    /// Latent responses to one factor with another held fixed.
    Traverse {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_parser = parse_split)]
        split: Option<Split>,
        /// Factor held fixed, optionally with its value: `speaker` or `speaker=3`.
        #[arg(long)]
        fix: String,
        #[arg(long)]
        vary: String,
        #[arg(long)]
        max_utterances: Option<usize>,
        #[arg(long, value_parser = parse_aggregation)]
        aggregation: Option<Aggregation>,
    },
    /// Render SVG plots of embeddings and training curves.
    Plot {
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        factors: Option<PathBuf>,
        #[arg(long, default_value = "vowel")]
        factor: String,
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    match s {
        "fd" => Ok(Method::Fd),
        "ewt" => Ok(Method::Ewt),
        _ => Err(format!("unknown method '{s}' (expected fd or ewt)")),
    }
}

fn parse_split(s: &str) -> Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "dev" => Ok(Split::Dev),
        "test" => Ok(Split::Test),
        _ => Err(format!("unknown split '{s}' (expected train, dev or test)")),
    }
}

fn parse_aggregation(s: &str) -> Result<Aggregation, String> {
    Aggregation::parse(s).ok_or_else(|| format!("unknown aggregation '{s}'"))
}

fn parse_classifier(s: &str) -> Result<ClassifierKind, String> {
    ClassifierKind::parse(s).map_err(|e| e.to_string())
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.unwrap_or(cfg.seed);
    cfg.set_seed(seed);
    set(&mut cfg.out, cli.out);
    match cli.command {
        Command::GenData { n, speakers } => {
            set(&mut cfg.data.n_utterances, n);
            set(&mut cfg.data.n_speakers, speakers);
            commands::gen_data(&cfg)
        }
        Command::Decompose { input, method, components } => {
            cfg.inputs.wav = Some(input);
            set(&mut cfg.decomposition.method, method);
            set(&mut cfg.decomposition.components, components);
            commands::decompose_wav(&cfg)
        }
        Command::Train { data, beta, beta_s, epochs, lr_z, lr_s, max_train, max_dev, no_decompose, no_contrastive } => {
            if data.is_some() {
                cfg.data.dir = data;
            }
            set(&mut cfg.training.beta, beta);
            set(&mut cfg.training.beta_s, beta_s);
            set(&mut cfg.training.t_max, epochs);
            set(&mut cfg.training.lr_z, lr_z);
            set(&mut cfg.training.lr_s, lr_s);
            if max_train.is_some() {
                cfg.data.max_train = max_train;
            }
            if max_dev.is_some() {
                cfg.data.max_dev = max_dev;
            }
            cfg.training.decompose &= !no_decompose;
            cfg.training.contrastive &= !no_contrastive;
            commands::train(&cfg)
        }
        Command::Embed { checkpoint, data, split, max_utterances, aggregation } => {
            if checkpoint.is_some() {
                cfg.inputs.checkpoint = checkpoint;
            }
            if data.is_some() {
                cfg.data.dir = data;
            }
            set(&mut cfg.data.split, split);
            if max_utterances.is_some() {
                cfg.data.max_eval = max_utterances;
            }
            set(&mut cfg.encoder.aggregation, aggregation);
            commands::embed(&cfg)
        }
        Command::Eval { embeddings, factors, metrics, task, classifier, folds, cv_seeds } => {
            if embeddings.is_some() {
                cfg.inputs.embeddings = embeddings;
            }
            if factors.is_some() {
                cfg.inputs.factors = factors;
            }
            match (metrics, &task) {
                (Some(m), _) => cfg.eval.metrics = m,
                // a task alone means only the task
                (None, Some(_)) => cfg.eval.metrics.clear(),
                _ => {}
            }
            set(&mut cfg.eval.tasks, task);
            set(&mut cfg.eval.classifier, classifier);
            set(&mut cfg.eval.folds, folds);
            set(&mut cfg.eval.seeds, cv_seeds);
            commands::eval(&cfg)
        }
        Command::Traverse { checkpoint, data, split, fix, vary, max_utterances, aggregation } => {
            if checkpoint.is_some() {
                cfg.inputs.checkpoint = checkpoint;
            }
            if data.is_some() {
                cfg.data.dir = data;
            }
            set(&mut cfg.data.split, split);
            if max_utterances.is_some() {
                cfg.data.max_eval = max_utterances;
            }
            set(&mut cfg.encoder.aggregation, aggregation);
            commands::traverse(&cfg, &fix, &vary)
        }
        Command::Plot { embeddings, factors, factor, log } => {
            if embeddings.is_some() {
                cfg.inputs.embeddings = embeddings;
            }
            if factors.is_some() {
                cfg.inputs.factors = factors;
            }
            if log.is_some() {
                cfg.inputs.log = log;
            }
            commands::plot(&cfg, &factor)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match &e {
                CliError::Core(inner) => {
                    let mut src = std::error::Error::source(inner);
                    while let Some(s) = src {
                        eprintln!("  caused by: {s}");
                        src = s.source();
                    }
                    e.exit_code()
                }
                _ => e.exit_code(),
            };
            ExitCode::from(code as u8)
        }
    }
}
