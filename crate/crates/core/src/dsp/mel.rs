use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dsp::framing::samples_for_ms;
use crate::dsp::spectrum::hann;
use crate::dsp::Signal;
use crate::error::{Error, Result};

pub const DEFAULT_MELS: usize = 80;
pub const SUB_WINDOW_MS: f64 = 25.0;
pub const SUB_HOP_MS: f64 = 10.0;
pub const ENERGY_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Log-Mel energies, one row per 25 ms sub-window. Trailing samples that do
/// not fill a whole sub-window are dropped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MelFrames {
    /// Row-major `[n_frames × n_mels]`.
    pub frames: Vec<f64>,
    pub n_frames: usize,
    pub n_mels: usize,
    pub frame_length_ms: f64,
    pub hop_ms: f64,
}

impl MelFrames {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.frames[i * self.n_mels..(i + 1) * self.n_mels]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.frames.chunks(self.n_mels)
    }
}

/// Reusable filterbank and FFT plan for one sample rate.
pub struct MelExtractor {
    sample_rate: u32,
    n_mels: usize,
    win: usize,
    hop: usize,
    n_fft: usize,
    window: Vec<f64>,
    /// Per filter: first bin and weights.
    filters: Vec<(usize, Vec<f64>)>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MelExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MelExtractor")
            .field("sample_rate", &self.sample_rate)
            .field("n_mels", &self.n_mels)
            .field("n_fft", &self.n_fft)
            .finish()
    }
}

impl MelExtractor {
    pub fn new(sample_rate: u32, n_mels: usize) -> Result<Self> {
        if n_mels == 0 {
            return Err(Error::InvalidArgument("filterbank size must be at least 1".into()));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        let win = samples_for_ms(SUB_WINDOW_MS, sample_rate).max(2);
        let hop = samples_for_ms(SUB_HOP_MS, sample_rate).max(1);
        let n_fft = win.next_power_of_two();
        let nyq = sample_rate as f64 / 2.0;
        let top = hz_to_mel(nyq);
        let centres: Vec<f64> = (0..n_mels + 2).map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64)).collect();
        let bin_hz = sample_rate as f64 / n_fft as f64;
        let n_bins = n_fft / 2 + 1;
        let filters = (0..n_mels)
            .map(|m| {
                let (lo, mid, hi) = (centres[m], centres[m + 1], centres[m + 2]);
                let weights: Vec<(usize, f64)> = (0..n_bins)
                    .filter_map(|k| {
                        let f = k as f64 * bin_hz;
                        let w = if f > lo && f <= mid {
                            (f - lo) / (mid - lo)
                        } else if f > mid && f < hi {
                            (hi - f) / (hi - mid)
                        } else {
                            0.0
                        };
                        (w > 0.0).then_some((k, w))
                    })
                    .collect();
                match weights.first() {
                    Some(&(start, _)) => (start, weights.iter().map(|p| p.1).collect()),
                    None => (0, Vec::new()),
                }
            })
            .collect();
        Ok(Self {
            sample_rate,
            n_mels,
            win,
            hop,
            n_fft,
            window: hann(win),
            filters,
            fft: FftPlanner::new().plan_fft_forward(n_fft),
        })
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Centre frequency of every filter in Hz.
    pub fn centre_frequencies(&self) -> Vec<f64> {
        let top = hz_to_mel(self.sample_rate as f64 / 2.0);
        (1..=self.n_mels).map(|i| mel_to_hz(top * i as f64 / (self.n_mels + 1) as f64)).collect()
    }

    /// Number of sub-window rows produced for `len` samples.
    pub fn rows_for(&self, len: usize) -> usize {
        if len <= self.win {
            1
        } else {
            1 + (len - self.win) / self.hop
        }
    }

    /// Appends log-Mel rows for `samples` into `out` (length grows by `rows × n_mels`).
    pub fn extract_into(&self, samples: &[f64], out: &mut Vec<f64>) {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n_fft];
        let mut power = vec![0.0; self.n_fft / 2 + 1];
        for r in 0..self.rows_for(samples.len()) {
            let start = r * self.hop;
            let sub = &samples[start..(start + self.win).min(samples.len())];
            buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for (i, (&x, &w)) in sub.iter().zip(&self.window).enumerate() {
                buf[i].re = x * w;
            }
            self.fft.process(&mut buf);
            for (p, z) in power.iter_mut().zip(&buf) {
                *p = z.norm_sqr();
            }
            for (start, w) in &self.filters {
                let e: f64 = w.iter().zip(&power[*start..]).map(|(a, b)| a * b).sum();
                out.push(e.max(ENERGY_FLOOR).ln());
            }
        }
    }

    pub fn extract(&self, frame: &Signal) -> Result<MelFrames> {
        if frame.sample_rate() != self.sample_rate {
            return Err(Error::InvalidArgument(format!(
                "extractor built for {} Hz, signal at {} Hz",
                self.sample_rate,
                frame.sample_rate()
            )));
        }
        let mut frames = Vec::new();
        self.extract_into(frame.samples(), &mut frames);
        Ok(MelFrames {
            n_frames: frames.len() / self.n_mels,
            frames,
            n_mels: self.n_mels,
            frame_length_ms: SUB_WINDOW_MS,
            hop_ms: SUB_HOP_MS,
        })
    }
}

pub fn mel_features(frame: &Signal, n_mels: usize) -> Result<MelFrames> {
    MelExtractor::new(frame.sample_rate(), n_mels)?.extract(frame)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_scale_round_trip() {
        for hz in [0.0, 100.0, 1000.0, 7999.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        assert!((hz_to_mel(1000.0) - 1000.0).abs() < 0.1);
    }

    #[test]
    fn two_hundred_ms_gives_eighteen_rows() {
        let m = mel_features(&Signal::zeros(3200, 16_000), 80).unwrap();
        assert_eq!(m.n_frames, 18);
        assert_eq!(m.frames.len(), 18 * 80);
    }

    #[test]
    fn silence_is_floor() {
        let m = mel_features(&Signal::zeros(3200, 16_000), 80).unwrap();
        assert!(m.frames.iter().all(|&v| v == ENERGY_FLOOR.ln()));
    }

    #[test]
    fn every_filter_has_support() {
        let ex = MelExtractor::new(16_000, 80).unwrap();
        assert!(ex.filters.iter().all(|(_, w)| !w.is_empty()));
    }

    #[test]
    fn rejects_zero_filters() {
        assert!(MelExtractor::new(16_000, 0).is_err());
    }
}
