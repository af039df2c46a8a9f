//! One function per subcommand. Each takes a fully resolved config.

use std::fs;
use std::path::{Path, PathBuf};

use decvae::dsp::{component_correlation_matrix, decompose, read_wav, write_components_wav};
use decvae::fsutil::{atomic_write, atomic_write_str};
use decvae::metrics::dci::DciConfig;
use decvae::metrics::{
    config_hash, dci_scores, gcn_score, irs_score, latent_traversal_response, mi_matrix, modularity_explicitness,
    task_eval_cv, CvConfig, EmbeddingTable, FactorTable, Matrix, MetricReport,
};
use decvae::model::train::train_from_signals;
use decvae::model::{load_checkpoint, save_checkpoint, EpochLog};
use decvae::simvowels::{generate_dataset, Split};
use log::info;
use serde::Serialize;

use crate::config::{EvalSection, RunConfig};
use crate::error::{user, CliError, CliResult};
use crate::pipeline::{embed_utterances, load_split, Utterance};
use crate::plot::{loss_svg, pca_2d, scatter_svg};

pub const METRICS: [&str; 5] = ["dci", "mi", "gcn", "modexp", "irs"];

fn required<'a>(p: &'a Option<PathBuf>, what: &str, flag: &str) -> CliResult<&'a Path> {
    p.as_deref().ok_or_else(|| user(format!("missing {what} (pass {flag} or set it in the config)")))
}

fn existing<'a>(p: &'a Option<PathBuf>, what: &str, flag: &str) -> CliResult<&'a Path> {
    let path = required(p, what, flag)?;
    if !path.exists() {
        return Err(user(format!("{what} {} does not exist", path.display())));
    }
    Ok(path)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(decvae::Error::from)? + "\n";
    Ok(atomic_write_str(path, &text)?)
}

pub fn gen_data(cfg: &RunConfig) -> CliResult<()> {
    let rows = generate_dataset(&cfg.out, &cfg.dataset())?;
    cfg.persist("gen-data")?;
    info!("wrote {} utterances to {}", rows.len(), cfg.out.display());
    Ok(())
}

#[derive(Serialize)]
struct DecompositionSummary {
    sample_rate: u32,
    bands_hz: Vec<(f64, f64)>,
    correlation: decvae::dsp::CorrelationMatrix,
    mean_abs_correlation: f64,
}

pub fn decompose_wav(cfg: &RunConfig) -> CliResult<()> {
    let wav = existing(&cfg.inputs.wav, "input wav", "--input")?;
    let signal = read_wav(wav)?;
    let cs = decompose(&signal, &cfg.decomposition)?;
    let corr = component_correlation_matrix(&cs);
    write_components_wav(&cfg.out.join("components.wav"), &cs)?;
    write_json(
        &cfg.out.join("decomposition.json"),
        &DecompositionSummary {
            sample_rate: signal.sample_rate(),
            bands_hz: cs.bands.clone(),
            mean_abs_correlation: corr.mean_abs_off_diagonal(true),
            correlation: corr,
        },
    )?;
    cfg.persist("decompose")?;
    Ok(())
}

pub fn log_csv(log: &[EpochLog]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in log {
        w.serialize(row).map_err(decvae::Error::from)?;
    }
    if log.is_empty() {
        w.write_record(LOG_COLUMNS).map_err(decvae::Error::from)?;
    }
    w.into_inner().map_err(|e| CliError::Internal(e.to_string()))
}

pub const LOG_COLUMNS: [&str; 9] =
    ["epoch", "loss_total", "loss_recon", "loss_ortho", "loss_prior", "jsd_pos_mean", "jsd_neg_mean", "lr_Z", "lr_S"];

pub fn read_log(path: &Path) -> CliResult<Vec<EpochLog>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| user(format!("{}: {e}", path.display())))?;
    r.deserialize().map(|row| row.map_err(|e| user(format!("{}: {e}", path.display())))).collect()
}

fn signals(utts: &[Utterance]) -> Vec<decvae::dsp::Signal> {
    utts.iter().map(|u| u.signal.clone()).collect()
}

pub fn train(cfg: &RunConfig) -> CliResult<()> {
    let dir = required(&cfg.data.dir, "dataset directory", "--data")?;
    let train = load_split(dir, Split::Train, cfg.data.max_train)?;
    let dev = load_split(dir, Split::Dev, cfg.data.max_dev)?;
    if train.is_empty() {
        return Err(user(format!("{} has no training utterances", dir.display())));
    }
    info!("training on {} utterances, validating on {}", train.len(), dev.len());
    let out = train_from_signals(
        cfg.encoder.clone(),
        cfg.training.clone(),
        cfg.decomposition.clone(),
        &signals(&train),
        &signals(&dev),
    )?;
    fs::create_dir_all(&cfg.out).map_err(|e| decvae::Error::io(&cfg.out, e))?;
    atomic_write(&cfg.out.join("train_log.csv"), &log_csv(&out.log)?)?;
    save_checkpoint(&cfg.out.join("model.ckpt"), &out.model)?;
    cfg.persist("train")?;
    info!("stopped after {} epochs ({:?})", out.log.len(), out.stop);
    Ok(())
}

fn load_model(cfg: &RunConfig) -> CliResult<decvae::model::DecVae> {
    let path = existing(&cfg.inputs.checkpoint, "checkpoint", "--checkpoint")?;
    let mut model = load_checkpoint(path)?;
    model.encoder.aggregation = cfg.encoder.aggregation;
    Ok(model)
}

pub fn embed(cfg: &RunConfig) -> CliResult<()> {
    let model = load_model(cfg)?;
    let dir = required(&cfg.data.dir, "dataset directory", "--data")?;
    let utts = load_split(dir, cfg.data.split, cfg.data.max_eval)?;
    let e = embed_utterances(&model, &utts)?;
    e.frames.write(&cfg.out.join("frames.csv"))?;
    e.frame_factors.write(&cfg.out.join("frame_factors.csv"))?;
    e.sequences.write(&cfg.out.join("sequences.csv"))?;
    e.sequence_factors.write(&cfg.out.join("sequence_factors.csv"))?;
    cfg.persist("embed")?;
    info!("embedded {} frames, {} sequences", e.frames.len(), e.sequences.len());
    Ok(())
}

fn read_tables(cfg: &RunConfig) -> CliResult<(Matrix, FactorTable)> {
    let z = EmbeddingTable::read(existing(&cfg.inputs.embeddings, "embedding table", "--embeddings")?)?;
    let f = FactorTable::read(existing(&cfg.inputs.factors, "factor table", "--factors")?)?;
    if z.len() != f.len() {
        return Err(user(format!("{} embedding rows but {} factor rows", z.len(), f.len())));
    }
    Ok((z.to_matrix(), f))
}

/// Computes the configured metric blocks and classification tasks.
pub fn evaluate(z: &Matrix, f: &FactorTable, eval: &EvalSection) -> CliResult<MetricReport> {
    let cv = CvConfig { folds: eval.folds, seeds: eval.seeds.clone() };
    let mut report = MetricReport {
        config_hash: config_hash(eval)?,
        seeds: eval.seeds.clone(),
        n_rows: z.rows,
        dim: z.cols,
        ..MetricReport::default()
    };
    for m in &eval.metrics {
        match m.as_str() {
            "mi" => report.mi = Some(mi_matrix(z, eval.bins)?),
            "gcn" => report.gcn = Some(gcn_score(z)?),
            "dci" => report.dci = Some(dci_scores(z, f, &DciConfig { cv: cv.clone(), c: eval.dci_c })?),
            "modexp" => report.modexp = Some(modularity_explicitness(z, f, &cv)?),
            "irs" => report.irs = Some(irs_score(z, f)?),
            other => return Err(user(format!("unknown metric '{other}'; available: {}", METRICS.join(", ")))),
        }
    }
    for task in &eval.tasks {
        let fi = f.index_of(task).map_err(|e| user(e.to_string()))?;
        report.tasks.push(task_eval_cv(z, &f.codes[fi], task, eval.classifier, &cv)?);
    }
    report.validate_ranges().map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(report)
}

pub fn eval(cfg: &RunConfig) -> CliResult<()> {
    let (z, f) = read_tables(cfg)?;
    let report = evaluate(&z, &f, &cfg.eval)?;
    atomic_write_str(&cfg.out.join("metrics.json"), &report.to_json()?)?;
    cfg.persist("eval")?;
    Ok(())
}

/// `name` or `name=value`.
fn split_fixed(spec: &str) -> (&str, Option<&str>) {
    match spec.split_once('=') {
        Some((n, v)) => (n.trim(), Some(v.trim())),
        None => (spec.trim(), None),
    }
}

pub fn traverse(cfg: &RunConfig, fix: &str, vary: &str) -> CliResult<()> {
    let model = load_model(cfg)?;
    let dir = required(&cfg.data.dir, "dataset directory", "--data")?;
    let (fixed, value) = split_fixed(fix);
    if fixed != "speaker" {
        return Err(user(format!("can only hold 'speaker' fixed across utterances, got '{fixed}'")));
    }
    let utts = load_split(dir, cfg.data.split, None)?;
    let speaker = match value {
        Some(v) => v.parse::<usize>().map_err(|_| user(format!("speaker '{v}' is not an integer id")))?,
        None => utts.first().map(|u| u.speaker).ok_or_else(|| user("split is empty"))?,
    };
    let probe: Vec<Utterance> = utts
        .into_iter()
        .filter(|u| u.speaker == speaker)
        .take(cfg.data.max_eval.unwrap_or(usize::MAX))
        .collect();
    if probe.is_empty() {
        return Err(user(format!("speaker {speaker} has no utterances in the split")));
    }
    let e = embed_utterances(&model, &probe)?;
    let subspaces = model.encoder.aggregation_k();
    let t = latent_traversal_response(&e.frames.to_matrix(), &e.frame_factors, fixed, vary, subspaces)
        .map_err(|e| user(e.to_string()))?;
    t.write(&cfg.out.join("traversal.csv"))?;
    cfg.persist("traverse")?;
    Ok(())
}

pub fn plot(cfg: &RunConfig, factor: &str) -> CliResult<()> {
    let mut wrote = false;
    if cfg.inputs.embeddings.is_some() {
        let (z, f) = read_tables(cfg)?;
        let fi = f.index_of(factor).map_err(|e| user(e.to_string()))?;
        let rows: Vec<Vec<f64>> = (0..z.rows).map(|i| z.row(i).to_vec()).collect();
        let svg = scatter_svg(&pca_2d(&rows), &f.codes[fi], &f.levels[fi], &format!("PCA coloured by {factor}"));
        atomic_write_str(&cfg.out.join(format!("pca_{factor}.svg")), &svg)?;
        wrote = true;
    }
    if let Some(log) = &cfg.inputs.log {
        if !log.exists() {
            return Err(user(format!("training log {} does not exist", log.display())));
        }
        atomic_write_str(&cfg.out.join("losses.svg"), &loss_svg(&read_log(log)?))?;
        wrote = true;
    }
    if !wrote {
        return Err(user("nothing to plot: pass --embeddings/--factors and/or --log"));
    }
    cfg.persist("plot")?;
    Ok(())
}
