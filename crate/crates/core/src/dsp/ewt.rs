//! Empirical wavelet transform with a Meyer-type filter bank.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::dsp::decompose::{ComponentSet, DecompositionConfig, Method};
use crate::dsp::peaks::detect_spectral_peaks;
use crate::dsp::spectrum::{full_fft, full_ifft_real};
use crate::dsp::Signal;
use crate::error::{Error, Result};

/// Target transition ratio of each Meyer filter.
pub const EWT_GAMMA: f64 = 0.1;

pub fn ewt_decompose(signal: &Signal, config: &DecompositionConfig) -> Result<ComponentSet> {
    if config.method != Method::Ewt {
        return Err(Error::InvalidArgument("ewt_decompose called with a non-EWT config".into()));
    }
    config.validate(signal.sample_rate())?;
    let n = signal.len();
    if n < 2 {
        return Err(Error::SignalTooShort { len: n, needed: 1 });
    }
    let c = config.components;
    let spectrum = full_fft(signal.samples());
    let half: Vec<f64> = spectrum[..n / 2 + 1].iter().map(|z| z.norm()).collect();
    let boundaries = ewt_boundaries(&half, c, config.peak_prominence, n);
    let gamma = transition_ratio(&boundaries);

    let omegas: Vec<f64> = (0..n)
        .map(|k| {
            let k = if k <= n / 2 { k } else { n - k };
            2.0 * PI * k as f64 / n as f64
        })
        .collect();
    let mut components = Vec::with_capacity(c);
    for seg in 0..c {
        let buf: Vec<Complex64> = spectrum
            .iter()
            .zip(&omegas)
            .map(|(z, &w)| {
                let g = meyer_filter(w, seg, &boundaries, gamma);
                z * (g * g)
            })
            .collect();
        components.push(Signal::new(full_ifft_real(buf), signal.sample_rate())?);
    }
    let to_hz = signal.sample_rate() as f64 / (2.0 * PI);
    let bands = boundaries.windows(2).map(|w| (w[0] * to_hz, w[1] * to_hz)).collect();
    Ok(ComponentSet { original: signal.clone(), components, bands })
}

/// Segment limits in normalised frequency, `[0, w_1, ..., w_{c-1}, π]`.
///
/// Boundaries sit halfway between consecutive members of the `c` strongest
/// spectral maxima. If too few maxima exist the prominence is relaxed, and
/// as a last resort the spectrum is cut into equal widths.
pub fn ewt_boundaries(half_magnitude: &[f64], c: usize, prominence: f64, n: usize) -> Vec<f64> {
    let bins = half_magnitude.len();
    let mut p = prominence;
    let mut maxima = Vec::new();
    while p > 1e-6 {
        maxima = detect_spectral_peaks(half_magnitude, &[1..bins], p);
        if maxima.len() >= c {
            break;
        }
        p *= 0.5;
    }
    let to_omega = |k: f64| 2.0 * PI * k / n as f64;
    let mut bounds = vec![0.0];
    if maxima.len() >= c {
        maxima.sort_by(|&a, &b| half_magnitude[b].partial_cmp(&half_magnitude[a]).unwrap().then(a.cmp(&b)));
        maxima.truncate(c);
        maxima.sort_unstable();
        for w in maxima.windows(2) {
            bounds.push(to_omega(0.5 * (w[0] + w[1]) as f64));
        }
    } else {
        for i in 1..c {
            bounds.push(PI * i as f64 / c as f64);
        }
    }
    bounds.push(PI);
    bounds
}

/// Largest admissible transition ratio, capped at [`EWT_GAMMA`], so that
/// adjacent transition zones never overlap.
fn transition_ratio(bounds: &[f64]) -> f64 {
    let inner = &bounds[1..bounds.len() - 1];
    let mut limit = f64::INFINITY;
    for w in bounds.windows(2) {
        if w[0] > 0.0 {
            limit = limit.min((w[1] - w[0]) / (w[1] + w[0]));
        }
    }
    if inner.is_empty() {
        return EWT_GAMMA;
    }
    EWT_GAMMA.min(0.99 * limit)
}

fn meyer_beta(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x.powi(4) * (35.0 - 84.0 * x + 70.0 * x * x - 20.0 * x * x * x)
}

/// Filter `seg` evaluated at `|ω|`; the squares of all filters sum to one.
pub fn meyer_filter(w: f64, seg: usize, bounds: &[f64], gamma: f64) -> f64 {
    let last = bounds.len() - 2;
    let lo = bounds[seg];
    let hi = bounds[seg + 1];
    // upper edge: full pass below (1-γ)hi, cosine roll-off to (1+γ)hi
    let upper = if seg == last || w <= (1.0 - gamma) * hi {
        1.0
    } else if w >= (1.0 + gamma) * hi {
        0.0
    } else {
        (0.5 * PI * meyer_beta((w - (1.0 - gamma) * hi) / (2.0 * gamma * hi))).cos()
    };
    let lower = if seg == 0 || w >= (1.0 + gamma) * lo {
        1.0
    } else if w <= (1.0 - gamma) * lo {
        0.0
    } else {
        (0.5 * PI * meyer_beta((w - (1.0 - gamma) * lo) / (2.0 * gamma * lo))).sin()
    };
    upper * lower
}
