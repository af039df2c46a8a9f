use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 30;

/// Equal-width histogram codes over the observed range; `None` for a
/// constant column.
pub fn discretize(x: &[f64], bins: usize) -> Option<Vec<usize>> {
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        return None;
    }
    let width = (hi - lo) / bins as f64;
    Some(x.iter().map(|&v| (((v - lo) / width) as usize).min(bins - 1)).collect())
}

/// Plug-in entropy in nats of integer codes below `levels`.
pub fn entropy(codes: &[usize], levels: usize) -> f64 {
    let mut counts = vec![0usize; levels];
    codes.iter().for_each(|&c| counts[c] += 1);
    let n = codes.len() as f64;
    counts.iter().filter(|&&c| c > 0).map(|&c| -(c as f64 / n) * (c as f64 / n).ln()).sum()
}

/// Plug-in mutual information in nats between two code sequences.
pub fn mutual_information(a: &[usize], ka: usize, b: &[usize], kb: usize) -> f64 {
    let n = a.len() as f64;
    let mut joint = vec![0usize; ka * kb];
    let (mut ca, mut cb) = (vec![0usize; ka], vec![0usize; kb]);
    for (&x, &y) in a.iter().zip(b) {
        joint[x * kb + y] += 1;
        ca[x] += 1;
        cb[y] += 1;
    }
    let mut mi = 0.0;
    for x in 0..ka {
        for y in 0..kb {
            let c = joint[x * kb + y];
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (ca[x] as f64 * cb[y] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiMatrix {
    pub bins: usize,
    pub values: Vec<Vec<f64>>,
    /// Dimensions that were constant; their MI is reported as 0.
    pub constant_dims: Vec<usize>,
    pub mean_off_diagonal: f64,
}

/// Histogram mutual information between every pair of latent dimensions.
pub fn mi_matrix(z: &Matrix, bins: usize) -> Result<MiMatrix> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 bins, got {bins}")));
    }
    if z.rows == 0 {
        return Err(Error::EmptyDataset("mi_matrix on an empty table".into()));
    }
    let codes: Vec<Option<Vec<usize>>> = (0..z.cols).map(|j| discretize(&z.column(j), bins)).collect();
    let d = z.cols;
    let mut values = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in i..d {
            if let (Some(a), Some(b)) = (&codes[i], &codes[j]) {
                let v = mutual_information(a, bins, b, bins);
                values[i][j] = v;
                values[j][i] = v;
            }
        }
    }
    let pairs = d * d.saturating_sub(1);
    let off: f64 = (0..d).flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| values[i][j]).sum();
    Ok(MiMatrix {
        bins,
        values,
        constant_dims: codes.iter().enumerate().filter(|(_, c)| c.is_none()).map(|(i, _)| i).collect(),
        mean_off_diagonal: if pairs == 0 { 0.0 } else { off / pairs as f64 },
    })
}
