use serde::{Deserialize, Serialize};

use super::dci::{check_rows, usable_factors};
use super::matrix::Matrix;
use super::table::FactorTable;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrsReport {
    /// Deviation-weighted mean over dimensions of each dimension's best score.
    pub score: f64,
    /// Deviation-weighted robustness of all dimensions to each factor.
    pub per_factor: Vec<f64>,
    pub per_dim: Vec<f64>,
    pub factors: Vec<String>,
    /// True when every dimension is constant, so the code carries no information.
    pub uninformative: bool,
    /// Fraction of (factor, value) cells with at least one row.
    pub coverage: f64,
}

/// Interventional robustness: for every factor value, how far the latents
/// move while all other factors vary, relative to each dimension's largest
/// deviation from its global mean.
pub fn irs_score(z: &Matrix, factors: &FactorTable) -> Result<IrsReport> {
    check_rows(z, factors)?;
    let (keep, _) = usable_factors(factors);
    if keep.len() < 2 {
        return Err(Error::InvalidArgument("IRS needs at least two factors with two or more classes".into()));
    }
    let (mean, _) = z.column_moments();
    let max_dev: Vec<f64> = (0..z.cols)
        .map(|d| (0..z.rows).map(|i| (z.get(i, d) - mean[d]).abs()).fold(0.0, f64::max))
        .collect();
    let active: Vec<usize> = (0..z.cols).filter(|&d| max_dev[d] > 0.0).collect();
    let names = keep.iter().map(|&f| factors.names[f].clone()).collect();
    let (mut cells, mut filled) = (0usize, 0usize);
    let mut irs = vec![vec![1.0; keep.len()]; z.cols];
    for (j, &f) in keep.iter().enumerate() {
        let mut members = vec![Vec::new(); factors.n_classes(f)];
        factors.codes[f].iter().enumerate().for_each(|(i, &c)| members[c].push(i));
        cells += members.len();
        let groups: Vec<&Vec<usize>> = members.iter().filter(|m| !m.is_empty()).collect();
        filled += groups.len();
        for &d in &active {
            let mut dev = 0.0;
            for g in &groups {
                let loc = g.iter().map(|&i| z.get(i, d)).sum::<f64>() / g.len() as f64;
                dev += g.iter().map(|&i| (z.get(i, d) - loc).abs()).fold(0.0, f64::max);
            }
            irs[d][j] = (1.0 - dev / groups.len() as f64 / max_dev[d]).clamp(0.0, 1.0);
        }
    }
    let per_dim: Vec<f64> = irs.iter().map(|r| r.iter().cloned().fold(0.0, f64::max)).collect();
    let coverage = filled as f64 / cells.max(1) as f64;
    if active.is_empty() {
        return Ok(IrsReport {
            score: 1.0,
            per_factor: vec![1.0; keep.len()],
            per_dim,
            factors: names,
            uninformative: true,
            coverage,
        });
    }
    let wsum: f64 = active.iter().map(|&d| max_dev[d]).sum();
    let weighted = |v: &dyn Fn(usize) -> f64| active.iter().map(|&d| v(d) * max_dev[d]).sum::<f64>() / wsum;
    Ok(IrsReport {
        score: weighted(&|d| per_dim[d]),
        per_factor: (0..keep.len()).map(|j| weighted(&|d| irs[d][j])).collect(),
        per_dim,
        factors: names,
        uninformative: false,
        coverage,
    })
}
