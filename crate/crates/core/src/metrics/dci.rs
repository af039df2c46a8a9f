use log::warn;
use serde::{Deserialize, Serialize};

use super::classifiers::{fit_logistic, Penalty, MAX_ITER};
use super::cv::{stratified_kfold, CvConfig};
use super::matrix::Matrix;
use super::stats::{accuracy, mean_ci, Estimate};
use super::table::FactorTable;
use crate::error::{Error, Result};
use crate::seed::mix_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DciConfig {
    pub cv: CvConfig,
    /// Inverse L1 strength of the probing classifiers.
    pub c: f64,
}

impl Default for DciConfig {
    fn default() -> Self {
        Self { cv: CvConfig::default(), c: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DciReport {
    pub disentanglement: Estimate,
    pub completeness: Estimate,
    pub informativeness: Estimate,
    pub factors: Vec<String>,
    pub excluded_factors: Vec<String>,
    /// Mean importance matrix over runs, `[dim][factor]`.
    pub importance: Vec<Vec<f64>>,
}

/// Entropy of the normalised weights with logarithm base `base`.
fn normalised_entropy(weights: &[f64], base: usize) -> f64 {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || base < 2 {
        return 0.0;
    }
    let h: f64 = weights.iter().map(|w| w / total).filter(|&p| p > 0.0).map(|p| -p * p.ln()).sum();
    h / (base as f64).ln()
}

/// Disentanglement and completeness of an importance matrix `r[dim][factor]`.
pub fn dci_from_importance(r: &[Vec<f64>]) -> (f64, f64) {
    let dims = r.len();
    let factors = r.first().map_or(0, Vec::len);
    let total: f64 = r.iter().flatten().sum();
    if total <= 0.0 {
        return (0.0, 0.0);
    }
    let disentanglement = r
        .iter()
        .map(|row| row.iter().sum::<f64>() / total * (1.0 - normalised_entropy(row, factors)))
        .sum();
    let completeness = (0..factors)
        .map(|f| {
            let col: Vec<f64> = r.iter().map(|row| row[f]).collect();
            col.iter().sum::<f64>() / total * (1.0 - normalised_entropy(&col, dims))
        })
        .sum();
    (disentanglement, completeness)
}

/// Usable factors: at least two observed classes.
pub(crate) fn usable_factors(factors: &FactorTable) -> (Vec<usize>, Vec<String>) {
    let mut keep = Vec::new();
    let mut excluded = Vec::new();
    for f in 0..factors.n_factors() {
        let mut seen = vec![false; factors.n_classes(f)];
        factors.codes[f].iter().for_each(|&c| seen[c] = true);
        if seen.iter().filter(|&&s| s).count() >= 2 {
            keep.push(f);
        } else {
            warn!("factor '{}' has a single class and is excluded", factors.names[f]);
            excluded.push(factors.names[f].clone());
        }
    }
    (keep, excluded)
}

pub(crate) fn check_rows(z: &Matrix, factors: &FactorTable) -> Result<()> {
    if z.rows != factors.len() {
        return Err(Error::shape("metrics", format!("{} embedding rows, {} factor rows", z.rows, factors.len())));
    }
    if z.rows == 0 {
        return Err(Error::EmptyDataset("no rows to evaluate".into()));
    }
    Ok(())
}

/// Importance by L1-logistic coefficient magnitude, with informativeness as
/// held-out accuracy, repeated over folds and seeds.
pub fn dci_scores(z: &Matrix, factors: &FactorTable, cfg: &DciConfig) -> Result<DciReport> {
    check_rows(z, factors)?;
    let (keep, excluded) = usable_factors(factors);
    if keep.len() < 2 {
        return Err(Error::InvalidArgument("DCI needs at least two factors with two or more classes".into()));
    }
    let splits: Vec<Vec<(Vec<usize>, Vec<usize>)>> = cfg
        .cv
        .seeds
        .iter()
        .flat_map(|&seed| {
            keep.iter().map(move |&f| (seed, f))
        })
        .map(|(seed, f)| stratified_kfold(&factors.codes[f], cfg.cv.folds, mix_seed(seed, f as u64)))
        .collect::<Result<_>>()?;

    let (mut d_runs, mut c_runs, mut i_runs) = (Vec::new(), Vec::new(), Vec::new());
    let mut mean_importance = vec![vec![0.0; keep.len()]; z.cols];
    let runs = (cfg.cv.seeds.len() * cfg.cv.folds) as f64;
    for s in 0..cfg.cv.seeds.len() {
        for fold in 0..cfg.cv.folds {
            let mut r = vec![vec![0.0; keep.len()]; z.cols];
            let mut acc = 0.0;
            for (j, &f) in keep.iter().enumerate() {
                let (train, test) = &splits[s * keep.len() + j][fold];
                let y = &factors.codes[f];
                let ytr: Vec<usize> = train.iter().map(|&i| y[i]).collect();
                let yte: Vec<usize> = test.iter().map(|&i| y[i]).collect();
                let xtr = z.select_rows(train);
                let (mean, sd) = xtr.column_moments();
                let model = fit_logistic(&xtr.standardized(&mean, &sd), &ytr, factors.n_classes(f), cfg.c, Penalty::L1, MAX_ITER)?;
                for (d, row) in r.iter_mut().enumerate() {
                    row[j] = (0..model.weights.cols).map(|k| model.weights.get(d, k).abs()).sum();
                }
                let pred = model.predict(&z.select_rows(test).standardized(&mean, &sd));
                acc += accuracy(&yte, &pred);
            }
            let (d, c) = dci_from_importance(&r);
            d_runs.push(d);
            c_runs.push(c);
            i_runs.push(acc / keep.len() as f64);
            for (m, row) in mean_importance.iter_mut().zip(&r) {
                m.iter_mut().zip(row).for_each(|(a, b)| *a += b / runs);
            }
        }
    }
    Ok(DciReport {
        disentanglement: mean_ci(&d_runs),
        completeness: mean_ci(&c_runs),
        informativeness: mean_ci(&i_runs),
        factors: keep.iter().map(|&f| factors.names[f].clone()).collect(),
        excluded_factors: excluded,
        importance: mean_importance,
    })
}
