use crate::autodiff::gemm;
use crate::error::{Error, Result};

/// Row-major dense matrix used by the metric estimators.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("matrix", "ragged rows"));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: idx.len(), cols: self.cols, data }
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm(
            self.rows,
            self.cols,
            other.cols,
            &self.data,
            (self.cols as isize, 1),
            &other.data,
            (other.cols as isize, 1),
            &mut out.data,
            false,
        );
        out
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.rows, other.rows);
        let mut out = Matrix::zeros(self.cols, other.cols);
        gemm(
            self.cols,
            self.rows,
            other.cols,
            &self.data,
            (1, self.cols as isize),
            &other.data,
            (other.cols as isize, 1),
            &mut out.data,
            false,
        );
        out
    }

    /// Column means and standard deviations; constant columns get sd 1.
    pub fn column_moments(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.rows.max(1) as f64;
        let mut mean = vec![0.0; self.cols];
        for i in 0..self.rows {
            mean.iter_mut().zip(self.row(i)).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; self.cols];
        for i in 0..self.rows {
            var.iter_mut().zip(self.row(i)).zip(&mean).for_each(|((s, v), m)| *s += (v - m) * (v - m));
        }
        let sd = var.iter().map(|v| if v / n > 1e-24 { (v / n).sqrt() } else { 1.0 }).collect();
        (mean, sd)
    }

    pub fn standardized(&self, mean: &[f64], sd: &[f64]) -> Matrix {
        let mut out = self.clone();
        for r in out.data.chunks_mut(self.cols) {
            r.iter_mut().zip(mean).zip(sd).for_each(|((v, m), s)| *v = (*v - m) / s);
        }
        out
    }

    /// Unbiased sample covariance of the columns.
    pub fn covariance(&self) -> Matrix {
        let (mean, _) = self.column_moments();
        let centred = self.standardized(&mean, &vec![1.0; self.cols]);
        let mut c = centred.t_matmul(&centred);
        let denom = (self.rows.max(2) - 1) as f64;
        c.data.iter_mut().for_each(|v| *v /= denom);
        c
    }
}

/// Log-determinant of a symmetric positive-definite matrix by Cholesky;
/// `None` if a pivot falls below `1e-12` of its diagonal entry, i.e. the
/// matrix is singular to working precision.
pub fn logdet_spd(a: &Matrix) -> Option<f64> {
    let n = a.rows;
    let mut l = vec![0.0; n * n];
    let mut logdet = 0.0;
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 1e-12 * a.get(j, j)) || !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        logdet += 2.0 * djj.ln();
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Some(logdet)
}
