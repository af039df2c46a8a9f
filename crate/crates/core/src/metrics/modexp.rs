use serde::{Deserialize, Serialize};

use super::classifiers::{fit_logistic, Penalty, MAX_ITER};
use super::cv::{stratified_kfold, CvConfig};
use super::dci::{check_rows, usable_factors};
use super::matrix::Matrix;
use super::mi::{discretize, mutual_information, DEFAULT_BINS};
use super::stats::{auroc, mean_ci, Estimate};
use super::table::FactorTable;
use crate::error::{Error, Result};
use crate::seed::mix_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModExpReport {
    pub modularity: f64,
    pub explicitness: Estimate,
    /// Dimensions carrying no information about any factor.
    pub skipped_dims: Vec<usize>,
    pub factors: Vec<String>,
}

/// Modularity of a mutual-information matrix `mi[dim][factor]`; returns the
/// mean score and the dimensions skipped for having zero information.
pub fn modularity_from_mi(mi: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let mut scores = Vec::new();
    let mut skipped = Vec::new();
    for (d, row) in mi.iter().enumerate() {
        let (best, theta) = row.iter().enumerate().fold((0, 0.0f64), |a, (f, &v)| if v > a.1 { (f, v) } else { a });
        if theta <= 0.0 || row.len() < 2 {
            skipped.push(d);
            continue;
        }
        let others: f64 = row.iter().enumerate().filter(|&(f, _)| f != best).map(|(_, v)| v * v).sum();
        scores.push(1.0 - others / (theta * theta * (row.len() - 1) as f64));
    }
    let m = if scores.is_empty() { 0.0 } else { scores.iter().sum::<f64>() / scores.len() as f64 };
    (m, skipped)
}

fn softmax_rows(mut s: Matrix) -> Matrix {
    let k = s.cols;
    for r in s.data.chunks_mut(k) {
        let max = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        r.iter_mut().for_each(|v| *v = (*v - max).exp());
        let z: f64 = r.iter().sum();
        r.iter_mut().for_each(|v| *v /= z);
    }
    s
}

/// Explicitness ranks test rows by the one-vs-rest class probability of an
/// L2 logistic probe.
pub fn modularity_explicitness(z: &Matrix, factors: &FactorTable, cv: &CvConfig) -> Result<ModExpReport> {
    check_rows(z, factors)?;
    let (keep, _) = usable_factors(factors);
    if keep.len() < 2 {
        return Err(Error::InvalidArgument("modularity needs at least two factors with two or more classes".into()));
    }
    let mi: Vec<Vec<f64>> = (0..z.cols)
        .map(|d| match discretize(&z.column(d), DEFAULT_BINS) {
            Some(codes) => keep
                .iter()
                .map(|&f| mutual_information(&codes, DEFAULT_BINS, &factors.codes[f], factors.n_classes(f)))
                .collect(),
            None => vec![0.0; keep.len()],
        })
        .collect();
    let (modularity, skipped_dims) = modularity_from_mi(&mi);

    let mut runs = Vec::new();
    for &seed in &cv.seeds {
        let splits: Vec<_> = keep
            .iter()
            .map(|&f| stratified_kfold(&factors.codes[f], cv.folds, mix_seed(seed, f as u64)))
            .collect::<Result<_>>()?;
        for fold in 0..cv.folds {
            let mut per_factor = Vec::new();
            for (j, &f) in keep.iter().enumerate() {
                let (train, test) = &splits[j][fold];
                let y = &factors.codes[f];
                let k = factors.n_classes(f);
                let ytr: Vec<usize> = train.iter().map(|&i| y[i]).collect();
                let xtr = z.select_rows(train);
                let (mean, sd) = xtr.column_moments();
                let model = fit_logistic(&xtr.standardized(&mean, &sd), &ytr, k, 1.0, Penalty::L2, MAX_ITER)?;
                let scores = softmax_rows(model.scores(&z.select_rows(test).standardized(&mean, &sd)));
                let aucs: Vec<f64> = (0..k)
                    .filter_map(|c| {
                        let positive: Vec<bool> = test.iter().map(|&i| y[i] == c).collect();
                        auroc(&scores.column(c), &positive)
                    })
                    .collect();
                if !aucs.is_empty() {
                    per_factor.push(aucs.iter().sum::<f64>() / aucs.len() as f64);
                }
            }
            let mean_auc = per_factor.iter().sum::<f64>() / per_factor.len().max(1) as f64;
            runs.push(((mean_auc - 0.5) / 0.5).clamp(0.0, 1.0));
        }
    }
    Ok(ModExpReport {
        modularity,
        explicitness: mean_ci(&runs),
        skipped_dims,
        factors: keep.iter().map(|&f| factors.names[f].clone()).collect(),
    })
}
