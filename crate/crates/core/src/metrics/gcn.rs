use serde::{Deserialize, Serialize};

use super::matrix::{logdet_spd, Matrix};
use crate::error::{Error, Result};

pub const GCN_RIDGE: f64 = 1e-6;
pub const GCN_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcnResult {
    /// Gaussian total correlation in nats.
    pub total_correlation: f64,
    pub gcn: f64,
    pub ridge_applied: bool,
}

/// `½(log det diag Σ − log det Σ)`, adding a ridge when Σ is singular.
pub fn gaussian_total_correlation(cov: &Matrix) -> (f64, bool) {
    let tc = |c: &Matrix| -> Option<f64> {
        let diag: f64 = (0..c.rows).map(|i| c.get(i, i).ln()).sum();
        let full = logdet_spd(c)?;
        diag.is_finite().then_some(0.5 * (diag - full))
    };
    if let Some(v) = tc(cov) {
        return (v.max(0.0), false);
    }
    let mut ridged = cov.clone();
    (0..cov.rows).for_each(|i| ridged.data[i * cov.cols + i] += GCN_RIDGE);
    (tc(&ridged).unwrap_or(f64::INFINITY).max(0.0), true)
}

/// Total correlation normalised by `dim · mean |Σ_offdiag|`.
pub fn gcn_score(z: &Matrix) -> Result<GcnResult> {
    if z.rows < z.cols + 1 {
        return Err(Error::InvalidArgument(format!(
            "gcn needs at least {} rows for {} dimensions, got {}",
            z.cols + 1,
            z.cols,
            z.rows
        )));
    }
    let cov = z.covariance();
    let (tc, ridge_applied) = gaussian_total_correlation(&cov);
    let d = z.cols;
    let mut off = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                off += cov.get(i, j).abs();
            }
        }
    }
    let mean_off = if d > 1 { off / (d * (d - 1)) as f64 } else { 0.0 };
    let gcn = if tc == 0.0 { 0.0 } else { tc / (d as f64 * mean_off.max(GCN_FLOOR)) };
    Ok(GcnResult { total_correlation: tc, gcn, ridge_applied })
}
