use serde::{Deserialize, Serialize};

use super::classifiers::{fit_predict, ClassifierKind};
use super::cv::{stratified_kfold, CvConfig};
use super::matrix::Matrix;
use super::stats::{accuracy, f1_scores, mean_ci, Estimate};
use crate::error::{Error, Result};
use crate::seed::mix_seed;

pub const MIN_CLASS_SIZE: usize = 5;
pub const INNER_FOLDS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub factor: String,
    pub classifier: ClassifierKind,
    pub n_rows: usize,
    pub n_classes: usize,
    pub chance: f64,
    pub accuracy: Estimate,
    pub f1_weighted: Estimate,
    pub f1_macro: Estimate,
    /// Regularization value chosen by the inner search, per outer run.
    pub selected: Vec<f64>,
}

fn inner_select(kind: ClassifierKind, x: &Matrix, y: &[usize], k: usize, seed: u64) -> Result<f64> {
    let folds = stratified_kfold(y, INNER_FOLDS, seed)?;
    let mut best = (f64::NEG_INFINITY, kind.grid()[0]);
    for &param in kind.grid() {
        let mut acc = 0.0;
        for (train, test) in &folds {
            let ytr: Vec<usize> = train.iter().map(|&i| y[i]).collect();
            let yte: Vec<usize> = test.iter().map(|&i| y[i]).collect();
            let pred = fit_predict(kind, param, (&x.select_rows(train), &ytr), k, &x.select_rows(test), seed)?;
            acc += accuracy(&yte, &pred);
        }
        if acc > best.0 + 1e-12 {
            best = (acc, param);
        }
    }
    Ok(best.1)
}

/// Nested cross-validated classification of `labels` from `z`.
pub fn task_eval_cv(
    z: &Matrix,
    labels: &[usize],
    factor: &str,
    kind: ClassifierKind,
    cv: &CvConfig,
) -> Result<TaskReport> {
    if z.rows != labels.len() {
        return Err(Error::shape("task_eval_cv", format!("{} rows, {} labels", z.rows, labels.len())));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    labels.iter().for_each(|&l| counts[l] += 1);
    let present = counts.iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::Stratification(format!("factor '{factor}' has fewer than two classes")));
    }
    if let Some((c, n)) = counts.iter().enumerate().find(|&(_, &n)| n > 0 && n < MIN_CLASS_SIZE.max(cv.folds)) {
        return Err(Error::Stratification(format!(
            "factor '{factor}': class {c} has {n} samples, need at least {}",
            MIN_CLASS_SIZE.max(cv.folds)
        )));
    }
    let (mut acc, mut f1w, mut f1m, mut selected) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for &seed in &cv.seeds {
        for (fold, (train, test)) in stratified_kfold(labels, cv.folds, seed)?.into_iter().enumerate() {
            let run_seed = mix_seed(seed, fold as u64);
            let xtr = z.select_rows(&train);
            let ytr: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
            let yte: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
            let param = inner_select(kind, &xtr, &ytr, k, run_seed)?;
            let pred = fit_predict(kind, param, (&xtr, &ytr), k, &z.select_rows(&test), run_seed)?;
            let (m, w) = f1_scores(&yte, &pred, k);
            acc.push(accuracy(&yte, &pred));
            f1w.push(w);
            f1m.push(m);
            selected.push(param);
        }
    }
    let max_share = *counts.iter().max().unwrap_or(&0) as f64 / labels.len() as f64;
    Ok(TaskReport {
        factor: factor.to_string(),
        classifier: kind,
        n_rows: z.rows,
        n_classes: present,
        chance: max_share,
        accuracy: mean_ci(&acc),
        f1_weighted: mean_ci(&f1w),
        f1_macro: mean_ci(&f1m),
        selected,
    })
}
