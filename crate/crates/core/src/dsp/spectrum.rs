use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::dsp::Signal;
use crate::error::{Error, Result};

/// One-sided spectrum of a real signal: bins `0..=len/2`.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub bins: Vec<Complex64>,
    /// Length of the time-domain signal.
    pub len: usize,
    pub sample_rate: u32,
}

impl Spectrum {
    pub fn magnitude(&self) -> Vec<f64> {
        self.bins.iter().map(|c| c.norm()).collect()
    }

    pub fn bin_hz(&self) -> f64 {
        self.sample_rate as f64 / self.len as f64
    }
}

pub fn real_fft(signal: &Signal) -> Result<Spectrum> {
    let n = signal.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("fft needs at least 2 samples, got {n}")));
    }
    let mut buf: Vec<Complex64> = signal.samples().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.truncate(n / 2 + 1);
    Ok(Spectrum { bins: buf, len: n, sample_rate: signal.sample_rate() })
}

pub fn real_ifft(spectrum: &Spectrum) -> Result<Signal> {
    let n = spectrum.len;
    if n < 2 || spectrum.bins.len() != n / 2 + 1 {
        return Err(Error::InvalidArgument(format!(
            "spectrum with {} bins cannot describe {n} samples",
            spectrum.bins.len()
        )));
    }
    let mut full = vec![Complex64::new(0.0, 0.0); n];
    full[..spectrum.bins.len()].copy_from_slice(&spectrum.bins);
    for k in 1..n - spectrum.bins.len() + 1 {
        full[n - k] = spectrum.bins[k].conj();
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut full);
    let scale = 1.0 / n as f64;
    Signal::new(full.iter().map(|c| c.re * scale).collect(), spectrum.sample_rate)
}

/// Full two-sided complex spectrum, used by filters defined on `|ω|`.
pub(crate) fn full_fft(samples: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

pub(crate) fn full_ifft_real(mut buf: Vec<Complex64>) -> Vec<f64> {
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Magnitude spectrum of the Hann-windowed signal.
pub fn hann_magnitude(signal: &Signal) -> Result<Spectrum> {
    let n = signal.len();
    let w = hann(n);
    let windowed: Vec<f64> = signal.samples().iter().zip(&w).map(|(a, b)| a * b).collect();
    real_fft(&Signal::new(windowed, signal.sample_rate())?)
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}
