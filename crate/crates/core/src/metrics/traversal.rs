use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::table::FactorTable;
use crate::error::{Error, Result};
use crate::fsutil::atomic_write;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimRole {
    MaxVariance,
    MinVariance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseRow {
    pub varied_value: String,
    pub subspace: usize,
    pub dim: usize,
    pub role: DimRole,
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraversalResponse {
    pub fixed: (String, String),
    pub varied: String,
    /// `(max-variance dim, min-variance dim)` per subspace, as column indices.
    pub selected: Vec<(usize, usize)>,
    pub rows: Vec<ResponseRow>,
}

fn variance(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
}

/// Mean latent amplitude per value of `varied`, for the highest- and
/// lowest-variance dimension of each of `n_subspaces` equal column blocks.
pub fn latent_traversal_response(
    z: &Matrix,
    factors: &FactorTable,
    fixed: &str,
    varied: &str,
    n_subspaces: usize,
) -> Result<TraversalResponse> {
    if z.rows != factors.len() || z.rows == 0 {
        return Err(Error::shape("traversal", format!("{} embedding rows, {} factor rows", z.rows, factors.len())));
    }
    if n_subspaces == 0 || z.cols % n_subspaces != 0 {
        return Err(Error::InvalidArgument(format!("{} dims do not split into {n_subspaces} subspaces", z.cols)));
    }
    let (fi, vi) = (factors.index_of(fixed)?, factors.index_of(varied)?);
    let fixed_codes = &factors.codes[fi];
    if fixed_codes.iter().any(|&c| c != fixed_codes[0]) {
        return Err(Error::InvalidArgument(format!("factor '{fixed}' is not constant in the probe set")));
    }
    let width = z.cols / n_subspaces;
    let var: Vec<f64> = (0..z.cols).map(|d| variance(&z.column(d))).collect();
    let selected: Vec<(usize, usize)> = (0..n_subspaces)
        .map(|s| {
            let dims = s * width..(s + 1) * width;
            let max = dims.clone().fold(s * width, |b, d| if var[d] > var[b] { d } else { b });
            let min = dims.fold(s * width, |b, d| if var[d] < var[b] { d } else { b });
            (max, min)
        })
        .collect();
    let mut rows = Vec::new();
    for (level, label) in factors.levels[vi].iter().enumerate() {
        let members: Vec<usize> = (0..z.rows).filter(|&i| factors.codes[vi][i] == level).collect();
        if members.is_empty() {
            continue;
        }
        for (s, &(max, min)) in selected.iter().enumerate() {
            for (dim, role) in [(max, DimRole::MaxVariance), (min, DimRole::MinVariance)] {
                let vals: Vec<f64> = members.iter().map(|&i| z.get(i, dim)).collect();
                rows.push(ResponseRow {
                    varied_value: label.clone(),
                    subspace: s,
                    dim,
                    role,
                    mean: vals.iter().sum::<f64>() / vals.len() as f64,
                    sd: variance(&vals).sqrt(),
                    count: vals.len(),
                });
            }
        }
    }
    Ok(TraversalResponse {
        fixed: (fixed.to_string(), factors.levels[fi][fixed_codes[0]].clone()),
        varied: varied.to_string(),
        selected,
        rows,
    })
}

impl TraversalResponse {
    /// Number of varied-factor values whose `mean ± sd` band on the given
    /// dimension overlaps no other value's band.
    pub fn separated_values(&self, subspace: usize, role: DimRole) -> usize {
        let bands: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.subspace == subspace && r.role == role)
            .map(|r| (r.mean - r.sd, r.mean + r.sd))
            .collect();
        (0..bands.len())
            .filter(|&i| (0..bands.len()).all(|j| j == i || bands[i].1 < bands[j].0 || bands[j].1 < bands[i].0))
            .count()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([self.varied.as_str(), "subspace", "dim", "role", "mean", "sd", "count"])?;
        for r in &self.rows {
            let role = match r.role {
                DimRole::MaxVariance => "max_variance",
                DimRole::MinVariance => "min_variance",
            };
            w.write_record([
                r.varied_value.clone(),
                r.subspace.to_string(),
                r.dim.to_string(),
                role.to_string(),
                format!("{:?}", r.mean),
                format!("{:?}", r.sd),
                r.count.to_string(),
            ])?;
        }
        w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        atomic_write(path, &self.to_csv()?)
    }
}
