//! Decomposition, framing and log-Mel extraction ahead of the encoder.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{EncoderConfig, TrainingConfig};
use crate::autodiff::Tensor;
use crate::dsp::framing::samples_for_ms;
use crate::dsp::{decompose, DecompositionConfig, MelExtractor, Signal};
use crate::error::{Error, Result};

/// Log-Mel views of one length-normalised sequence, stored as `f32`
/// in `[view][frame][sub-window][mel]` order.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceFeatures {
    pub data: Vec<f32>,
    pub views: usize,
    pub frames: usize,
    /// Frames holding signal; the rest are padding.
    pub valid: usize,
    pub sub: usize,
    pub mels: usize,
}

impl SequenceFeatures {
    pub fn block(&self) -> usize {
        self.sub * self.mels
    }

    pub fn frame(&self, view: usize, frame: usize) -> &[f32] {
        let b = self.block();
        let start = (view * self.frames + frame) * b;
        &self.data[start..start + b]
    }
}

/// Per-Mel-bin standardisation fitted on original views.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureNorm {
    pub fn identity(mels: usize) -> Self {
        Self { mean: vec![0.0; mels], std: vec![1.0; mels] }
    }

    pub fn fit(items: &[SequenceFeatures]) -> Result<Self> {
        let first = items.first().ok_or_else(|| Error::EmptyDataset("no sequences to fit normalisation".into()))?;
        let m = first.mels;
        let (mut sum, mut sq, mut n) = (vec![0.0; m], vec![0.0; m], 0usize);
        for it in items {
            for f in 0..it.valid {
                for row in it.frame(0, f).chunks(m) {
                    for (k, &v) in row.iter().enumerate() {
                        sum[k] += v as f64;
                        sq[k] += (v as f64) * (v as f64);
                    }
                    n += 1;
                }
            }
        }
        if n == 0 {
            return Err(Error::EmptyDataset("no valid frames to fit normalisation".into()));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, mu)| (q / n as f64 - mu * mu).max(0.0).sqrt().max(1e-3))
            .collect();
        Ok(Self { mean, std })
    }
}

/// Which frames of each batch item enter the loss.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskSpec {
    pub selected: Vec<Vec<usize>>,
}

impl MaskSpec {
    pub fn count(&self) -> usize {
        self.selected.iter().map(Vec::len).sum()
    }
}

/// Draws `round(pct · valid) ≥ 1` frames per item uniformly without replacement.
pub fn sample_mask<R: Rng>(valid: &[usize], pct: f64, rng: &mut R) -> MaskSpec {
    let selected = valid
        .iter()
        .map(|&n| {
            let k = ((pct * n as f64).round() as usize).clamp(1, n.max(1));
            let mut idx = sample(rng, n.max(1), k).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect();
    MaskSpec { selected }
}

/// A piece of an input sequence after length normalisation.
#[derive(Clone, Debug, PartialEq)]
pub struct Prepared {
    pub source: usize,
    pub start_sample: usize,
    pub signal: Signal,
}

/// Drops sequences shorter than `d_min` seconds and cuts longer ones into
/// consecutive `d_max` pieces; a trailing piece shorter than `d_min` is dropped.
pub fn prepare_sequences(signals: &[Signal], d_min: f64, d_max: f64) -> Vec<Prepared> {
    let mut out = Vec::new();
    for (i, s) in signals.iter().enumerate() {
        let sr = s.sample_rate() as f64;
        let min_len = (d_min * sr).round() as usize;
        let max_len = ((d_max * sr).round() as usize).max(1);
        let mut start = 0;
        while start < s.len() {
            let end = (start + max_len).min(s.len());
            if end - start < min_len.max(1) {
                break;
            }
            let piece = Signal::new(s.samples()[start..end].to_vec(), s.sample_rate()).expect("slice of valid signal");
            out.push(Prepared { source: i, start_sample: start, signal: piece });
            start = end;
        }
    }
    out
}

/// Decomposition front-end plus Mel extraction.
#[derive(Debug)]
pub struct FeaturePipeline {
    pub decomposition: DecompositionConfig,
    pub decompose: bool,
    pub frame_ms: f64,
    pub frames: usize,
    pub views: usize,
    mel: MelExtractor,
    frame_len: usize,
}

impl FeaturePipeline {
    pub fn new(enc: &EncoderConfig, tc: &TrainingConfig, dc: &DecompositionConfig, sample_rate: u32) -> Result<Self> {
        if dc.components != enc.components {
            return Err(Error::ConfigMismatch(format!(
                "decomposition yields {} components, encoder expects {}",
                dc.components, enc.components
            )));
        }
        dc.validate(sample_rate)?;
        Ok(Self {
            decomposition: dc.clone(),
            decompose: tc.decompose,
            frame_ms: tc.frame_ms,
            frames: tc.frames_per_sequence(),
            views: enc.views(),
            mel: MelExtractor::new(sample_rate, enc.n_mels)?,
            frame_len: samples_for_ms(tc.frame_ms, sample_rate),
        })
    }

    pub fn sub_windows(&self) -> usize {
        self.mel.rows_for(self.frame_len)
    }

    pub fn sample_rate(&self) -> u32 {
        self.mel.sample_rate()
    }

    /// Frames a sequence, decomposes every frame, and extracts Mel views.
    /// Sequences are zero-padded (or truncated) to the configured frame count.
    pub fn extract(&self, signal: &Signal) -> Result<SequenceFeatures> {
        if signal.sample_rate() != self.sample_rate() {
            return Err(Error::ConfigMismatch(format!(
                "pipeline runs at {} Hz, signal at {} Hz",
                self.sample_rate(),
                signal.sample_rate()
            )));
        }
        let sub = self.sub_windows();
        let mels = self.mel.n_mels();
        let block = sub * mels;
        let valid = signal.len().div_ceil(self.frame_len).clamp(1, self.frames);
        let mut data = vec![0f32; self.views * self.frames * block];
        let mut rows = Vec::with_capacity(block);
        for f in 0..self.frames {
            let start = f * self.frame_len;
            let mut x = vec![0.0; self.frame_len];
            if f < valid && start < signal.len() {
                let end = (start + self.frame_len).min(signal.len());
                x[..end - start].copy_from_slice(&signal.samples()[start..end]);
            }
            let frame = Signal::new(x, signal.sample_rate())?;
            let views: Vec<Signal> = if self.decompose && f < valid {
                let cs = decompose(&frame, &self.decomposition)?;
                std::iter::once(cs.original).chain(cs.components).collect()
            } else {
                vec![frame; self.views]
            };
            for (v, s) in views.iter().enumerate() {
                rows.clear();
                self.mel.extract_into(s.samples(), &mut rows);
                let at = (v * self.frames + f) * block;
                for (dst, src) in data[at..at + block].iter_mut().zip(&rows) {
                    *dst = *src as f32;
                }
            }
        }
        Ok(SequenceFeatures { data, views: self.views, frames: self.frames, valid, sub, mels })
    }

    pub fn extract_all(&self, signals: &[Signal]) -> Result<Vec<SequenceFeatures>> {
        signals.iter().map(|s| self.extract(s)).collect()
    }
}

/// Stacks items into the encoder input `[V·B·F, T, M]`, ordered view, item, frame.
pub fn assemble(items: &[&SequenceFeatures], norm: &FeatureNorm) -> Result<Tensor> {
    let first = items.first().ok_or_else(|| Error::EmptyDataset("empty batch".into()))?;
    let (v, f, t, m) = (first.views, first.frames, first.sub, first.mels);
    if items.iter().any(|s| (s.views, s.frames, s.sub, s.mels) != (v, f, t, m)) {
        return Err(Error::shape("assemble", "batch items differ in layout"));
    }
    if norm.mean.len() != m {
        return Err(Error::ConfigMismatch(format!("normalisation has {} bins, features {m}", norm.mean.len())));
    }
    let b = items.len();
    let mut out = Vec::with_capacity(v * b * f * t * m);
    for view in 0..v {
        for it in items {
            for frame in 0..f {
                for row in it.frame(view, frame).chunks(m) {
                    out.extend(row.iter().zip(&norm.mean).zip(&norm.std).map(|((&x, mu), sd)| (x as f64 - mu) / sd));
                }
            }
        }
    }
    Tensor::new(vec![v * b * f, t, m], out)
}

/// Decomposes and extracts a batch, then draws its loss mask.
pub fn decompose_and_mask<R: Rng>(
    pipeline: &FeaturePipeline,
    signals: &[Signal],
    pct: f64,
    rng: &mut R,
) -> Result<(Vec<SequenceFeatures>, MaskSpec)> {
    let feats = pipeline.extract_all(signals)?;
    let valid: Vec<usize> = feats.iter().map(|f| f.valid).collect();
    Ok((feats, sample_mask(&valid, pct, rng)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mask_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = sample_mask(&[20, 20, 3, 1], 0.5, &mut rng);
        assert_eq!(m.selected.iter().map(Vec::len).collect::<Vec<_>>(), vec![10, 10, 2, 1]);
        assert!(m.selected[0].windows(2).all(|w| w[0] < w[1]));
        assert!(m.selected[0].iter().all(|&i| i < 20));
    }

    #[test]
    fn preparation_bounds() {
        let s = |n| Signal::new(vec![0.1; n], 1000).unwrap();
        let p = prepare_sequences(&[s(500), s(2500), s(4000)], 1.0, 2.0);
        let lens: Vec<(usize, usize)> = p.iter().map(|x| (x.source, x.signal.len())).collect();
        assert_eq!(lens, vec![(1, 2000), (2, 2000), (2, 2000)]);
    }
}
