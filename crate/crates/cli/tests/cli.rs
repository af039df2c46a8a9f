use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use decvae::metrics::{EmbeddingTable, FactorTable};
use decvae::model::EpochLog;
use decvae_cli::commands::{read_log, LOG_COLUMNS};
use decvae_cli::plot::{loss_svg, pca_2d, scatter_svg};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn decvae(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decvae"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for e in walk(dir) {
        let rel = e.strip_prefix(dir).unwrap().display().to_string();
        if rel.starts_with("resolved_") {
            continue;
        }
        out.push((rel, fs::read(&e).unwrap()));
    }
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut files = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            files.extend(walk(&p));
        } else {
            files.push(p);
        }
    }
    files
}

#[test]
fn empty_dataset_is_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let out = decvae(tmp.path(), &["--out", "d", "gen-data", "--n", "0"]);
    ok(&out);
    let manifest = fs::read_to_string(tmp.path().join("d/manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 1);
}

#[test]
fn generation_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&decvae(tmp.path(), &["--out", "a", "--seed", "4", "gen-data", "--n", "6", "--speakers", "2"]));
    ok(&decvae(tmp.path(), &["--out", "b", "--seed", "4", "gen-data", "--n", "6", "--speakers", "2"]));
    let (a, b) = (tree(&tmp.path().join("a")), tree(&tmp.path().join("b")));
    assert_eq!(a.len(), 7);
    assert_eq!(a, b);
    ok(&decvae(tmp.path(), &["--out", "a", "--seed", "4", "gen-data", "--n", "6", "--speakers", "2"]));
    assert_eq!(tree(&tmp.path().join("a")), b);
}

#[test]
fn training_without_manifest_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("empty")).unwrap();
    let out = decvae(tmp.path(), &["--out", "o", "train", "--data", "empty", "--epochs", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest"));
    assert!(!tmp.path().join("o/model.ckpt").exists());
}

#[test]
fn usage_errors_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(decvae(tmp.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(decvae(tmp.path(), &["--help"]).status.code(), Some(0));
    let out = decvae(tmp.path(), &["embed", "--checkpoint", "missing.ckpt", "--data", "."]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn full_pipeline_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(&decvae(dir, &["--out", "d", "gen-data", "--n", "30", "--speakers", "3"]));
    ok(&decvae(dir, &["--out", "m", "train", "--data", "d", "--epochs", "2", "--max-train", "12", "--max-dev", "3"]));

    let log_text = fs::read_to_string(dir.join("m/train_log.csv")).unwrap();
    let header: Vec<&str> = log_text.lines().next().unwrap().split(',').collect();
    assert_eq!(header, LOG_COLUMNS);
    let log = read_log(&dir.join("m/train_log.csv")).unwrap();
    assert_eq!(log.len(), 2);
    assert!(log.iter().all(|r| r.loss_total.is_finite()));

    ok(&decvae(dir, &["--out", "e", "embed", "--checkpoint", "m/model.ckpt", "--data", "d", "--split", "train"]));
    let z = EmbeddingTable::read(&dir.join("e/frames.csv")).unwrap();
    let f = FactorTable::read(&dir.join("e/frame_factors.csv")).unwrap();
    assert_eq!(z.len(), f.len());
    assert_eq!(z.dim(), 64);
    assert_eq!(f.names, vec!["vowel".to_string(), "speaker".to_string()]);

    ok(&decvae(
        dir,
        &["--out", "e", "eval", "--embeddings", "e/frames.csv", "--factors", "e/frame_factors.csv", "--folds", "3", "--cv-seeds", "0,1"],
    ));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("e/metrics.json")).unwrap()).unwrap();
    for block in ["dci", "mi", "gcn", "modexp", "irs"] {
        assert!(report[block].is_object(), "missing {block}");
    }
    for key in ["disentanglement", "completeness", "informativeness"] {
        let v = &report["dci"][key];
        let (m, lo, hi) = (v["mean"].as_f64().unwrap(), v["ci_low"].as_f64().unwrap(), v["ci_high"].as_f64().unwrap());
        assert!(lo <= m && m <= hi && (0.0..=1.0).contains(&m), "{key}: {v}");
    }

    ok(&decvae(
        dir,
        &["--out", "t", "eval", "--embeddings", "e/frames.csv", "--factors", "e/frame_factors.csv", "--task", "vowel", "--folds", "3", "--cv-seeds", "0"],
    ));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("t/metrics.json")).unwrap()).unwrap();
    assert!(report["dci"].is_null());
    let task = &report["tasks"][0];
    assert_eq!(task["factor"], "vowel");
    for key in ["accuracy", "f1_weighted", "f1_macro"] {
        assert!(task[key]["ci_low"].is_number() && task[key]["ci_high"].is_number());
    }

    let bad = decvae(dir, &["--out", "t", "eval", "--embeddings", "e/frames.csv", "--factors", "e/frame_factors.csv", "--task", "pitch"]);
    assert_eq!(bad.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&bad.stderr);
    assert!(msg.contains("vowel") && msg.contains("speaker"), "{msg}");

    ok(&decvae(
        dir,
        &["--out", "v", "traverse", "--checkpoint", "m/model.ckpt", "--data", "d", "--split", "train", "--fix", "speaker", "--vary", "vowel"],
    ));
    let trav = fs::read_to_string(dir.join("v/traversal.csv")).unwrap();
    assert_eq!(trav.lines().next().unwrap(), "vowel,subspace,dim,role,mean,sd,count");
    assert!(trav.lines().count() > 1);

    ok(&decvae(
        dir,
        &["--out", "p", "plot", "--embeddings", "e/frames.csv", "--factors", "e/frame_factors.csv", "--log", "m/train_log.csv"],
    ));
    assert!(fs::read_to_string(dir.join("p/pca_vowel.svg")).unwrap().contains("<svg"));
    assert!(fs::read_to_string(dir.join("p/losses.svg")).unwrap().contains("data-series=\"recon\""));
    assert!(dir.join("p/resolved_plot.toml").exists());
}

fn silhouette(points: &[[f64; 2]], labels: &[usize]) -> f64 {
    let k = labels.iter().max().unwrap() + 1;
    let dist = |a: &[f64; 2], b: &[f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let mut sum = vec![0.0; k];
        let mut cnt = vec![0usize; k];
        for (j, q) in points.iter().enumerate() {
            if i != j {
                sum[labels[j]] += dist(p, q);
                cnt[labels[j]] += 1;
            }
        }
        let a = sum[labels[i]] / cnt[labels[i]] as f64;
        let b = (0..k).filter(|&c| c != labels[i]).map(|c| sum[c] / cnt[c] as f64).fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    total / points.len() as f64
}

#[test]
fn projection_keeps_separated_clusters_apart() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let centres = [[4.0, 0.0, 0.0, 0.0, 0.0, 0.0], [0.0, 4.0, 0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 4.0, 0.0, 0.0, 0.0]];
    let (mut rows, mut labels) = (Vec::new(), Vec::new());
    for (c, centre) in centres.iter().enumerate() {
        for _ in 0..60 {
            rows.push(centre.iter().map(|m| m + noise.sample(&mut rng)).collect::<Vec<f64>>());
            labels.push(c);
        }
    }
    let pts = pca_2d(&rows);
    assert!(silhouette(&pts, &labels) >= 0.5);
    let svg = scatter_svg(&pts, &labels, &["a".into(), "b".into(), "c".into()], "clusters");
    assert_eq!(svg.matches("fill-opacity").count(), 180);
}

#[test]
fn degenerate_scatter_is_valid_svg() {
    let svg = scatter_svg(&pca_2d(&[vec![1.0, 2.0]]), &[0], &["only".into()], "one");
    assert!(svg.contains("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(!svg.contains("NaN"));
}

#[test]
fn long_log_draws_four_curves() {
    let log: Vec<EpochLog> = (1..=150)
        .map(|e| EpochLog {
            epoch: e,
            loss_total: 10.0 / e as f64,
            loss_recon: 1.0,
            loss_ortho: 2.0,
            loss_prior: 3.0 + e as f64,
            jsd_pos_mean: 0.1,
            jsd_neg_mean: 0.2,
            lr_z: 1e-3,
            lr_s: 1e-3,
        })
        .collect();
    let svg = loss_svg(&log);
    assert_eq!(svg.matches("class=\"curve\"").count(), 4);
    for s in ["total", "recon", "ortho", "prior"] {
        assert!(svg.contains(&format!("data-series=\"{s}\"")));
    }
}
