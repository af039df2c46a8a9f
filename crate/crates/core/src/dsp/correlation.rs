use serde::{Deserialize, Serialize};

use crate::dsp::ComponentSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    /// `(C+1) × (C+1)`, original first.
    pub values: Vec<Vec<f64>>,
    /// Views whose variance is zero; their off-diagonal entries are 0.
    pub zero_variance: Vec<bool>,
}

impl CorrelationMatrix {
    pub fn mean_abs_off_diagonal(&self, skip_original: bool) -> f64 {
        let n = self.values.len();
        let start = usize::from(skip_original);
        let mut sum = 0.0;
        let mut count = 0;
        for i in start..n {
            for j in start..n {
                if i != j {
                    sum += self.values[i][j].abs();
                    count += 1;
                }
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }
}

pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len().min(b.len());
    if n == 0 {
        return None;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (x, y) = (a[i] - ma, b[i] - mb);
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

pub fn component_correlation_matrix(cs: &ComponentSet) -> CorrelationMatrix {
    let views: Vec<&[f64]> = cs.views().map(|s| s.samples()).collect();
    let n = views.len();
    let zero_variance: Vec<bool> = views.iter().map(|v| pearson(v, v).is_none()).collect();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        values[i][i] = 1.0;
        for j in i + 1..n {
            let r = pearson(views[i], views[j]).unwrap_or(0.0);
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    CorrelationMatrix { values, zero_variance }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::Signal;

    fn set(views: Vec<Vec<f64>>) -> ComponentSet {
        let mut it = views.into_iter().map(|v| Signal::new(v, 8000).unwrap());
        let original = it.next().unwrap();
        let components: Vec<Signal> = it.collect();
        let bands = vec![(0.0, 1.0); components.len()];
        ComponentSet { original, components, bands }
    }

    #[test]
    fn identical_components_correlate_fully() {
        let x: Vec<f64> = (0..64).map(|i| (i as f64 * 0.3).sin()).collect();
        let m = component_correlation_matrix(&set(vec![x.clone(), x.clone(), x]));
        assert!(m.values.iter().flatten().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn distinct_fourier_modes_are_uncorrelated() {
        let n = 256;
        let mode = |k: f64| (0..n).map(|i| (2.0 * std::f64::consts::PI * k * i as f64 / n as f64).cos()).collect();
        let m = component_correlation_matrix(&set(vec![mode(3.0), mode(7.0), mode(20.0)]));
        for i in 0..3 {
            assert_eq!(m.values[i][i], 1.0);
            for j in 0..3 {
                assert!(i == j || m.values[i][j].abs() <= 1e-6);
                assert_eq!(m.values[i][j], m.values[j][i]);
            }
        }
    }

    #[test]
    fn zero_variance_is_flagged() {
        let x: Vec<f64> = (0..64).map(|i| i as f64).collect();
        let m = component_correlation_matrix(&set(vec![x, vec![0.0; 64]]));
        assert_eq!(m.zero_variance, vec![false, true]);
        assert_eq!(m.values[0][1], 0.0);
        assert_eq!(m.values[1][1], 1.0);
    }
}
