use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Vowel, VowelSpec, SAMPLE_RATE};
use crate::dsp::Signal;
use crate::error::{Error, Result};
use crate::seed::mix_seed;

pub const SEGMENTS: usize = 4;
pub const SEGMENT_S: f64 = 1.0;
const FACTOR_RANGE: (f64, f64) = (0.8, 1.2);
const F0_RANGE: (f64, f64) = (85.0, 255.0);
const VOICING_DEPTH: f64 = 0.3;
const BANDWIDTH_DEPTH: f64 = 0.5;
/// Noise standard deviation relative to the clean signal RMS (−40 dB).
const NOISE_REL: f64 = 0.01;
const PEAK: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeakerSpec {
    pub id: usize,
    pub vocal_tract_factor: f64,
    pub f0: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UtteranceRecord {
    pub signal: Signal,
    pub speaker_id: usize,
    pub vowels: [Vowel; SEGMENTS],
}

impl UtteranceRecord {
    /// Vowel label of each analysis frame; frames that straddle a segment
    /// boundary take the label of their first sample.
    pub fn frame_labels(&self, frame_ms: f64) -> Vec<Vowel> {
        let frame = (frame_ms * self.signal.sample_rate() as f64 / 1000.0).round() as usize;
        let seg = (SEGMENT_S * self.signal.sample_rate() as f64) as usize;
        let n = self.signal.len().div_ceil(frame.max(1));
        (0..n).map(|i| self.vowels[((i * frame) / seg).min(SEGMENTS - 1)]).collect()
    }
}

/// Mixes a global seed and an index into an independent stream seed.
pub fn utterance_seed(global: u64, index: u64) -> u64 {
    mix_seed(global, index)
}

pub fn build_speaker_bank(n: usize, seed: u64) -> Vec<SpeakerSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(utterance_seed(seed, u64::MAX));
    let mut bank: Vec<SpeakerSpec> = Vec::with_capacity(n);
    while bank.len() < n {
        let vocal_tract_factor = rng.random_range(FACTOR_RANGE.0..=FACTOR_RANGE.1);
        let f0 = rng.random_range(F0_RANGE.0..=F0_RANGE.1);
        if bank.iter().any(|s| s.vocal_tract_factor == vocal_tract_factor && s.f0 == f0) {
            continue;
        }
        bank.push(SpeakerSpec { id: bank.len(), vocal_tract_factor, f0 });
    }
    bank
}

pub fn synth_vowel_segment(speaker: &SpeakerSpec, vowel: &VowelSpec, duration_s: f64, seed: u64) -> Result<Signal> {
    if !(duration_s >= 0.1) {
        return Err(Error::InvalidArgument(format!("segment duration {duration_s} s below 0.1 s")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clean = formant_mix(speaker, vowel, duration_s, &mut rng)?;
    let rms = (clean.iter().map(|v| v * v).sum::<f64>() / clean.len() as f64).sqrt();
    let noise = Normal::new(0.0, NOISE_REL * rms.max(1e-12)).expect("positive std");
    let noisy: Vec<f64> = clean.iter().map(|v| v + noise.sample(&mut rng)).collect();
    let peak = noisy.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Signal::new(noisy.iter().map(|v| PEAK * v / peak).collect(), SAMPLE_RATE)
}

fn formant_mix(speaker: &SpeakerSpec, vowel: &VowelSpec, duration_s: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let sr = SAMPLE_RATE as f64;
    let n = (duration_s * sr).round() as usize;
    let nyq = sr / 2.0;
    let mut x = vec![0.0; n];
    for f in &vowel.formants {
        let centre = f.centre_hz * speaker.vocal_tract_factor;
        if centre + f.bandwidth_hz / 2.0 >= nyq {
            return Err(Error::AboveNyquist { freq_hz: centre, nyquist_hz: nyq });
        }
        let phase = rng.random_range(0.0..2.0 * PI);
        let mod_phase = rng.random_range(0.0..2.0 * PI);
        let (wc, wm) = (2.0 * PI * centre / sr, PI * f.bandwidth_hz / sr);
        for (i, v) in x.iter_mut().enumerate() {
            let t = i as f64;
            *v += f.amplitude * (wc * t + phase).cos() * (1.0 + BANDWIDTH_DEPTH * (wm * t + mod_phase).cos());
        }
    }
    let voicing_phase = rng.random_range(0.0..2.0 * PI);
    let w0 = 2.0 * PI * speaker.f0 / sr;
    for (i, v) in x.iter_mut().enumerate() {
        *v *= 1.0 + VOICING_DEPTH * (w0 * i as f64 + voicing_phase).cos();
    }
    Ok(x)
}

pub fn draw_vowels(seed: u64) -> [Vowel; SEGMENTS] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::array::from_fn(|_| Vowel::ALL[rng.random_range(0..Vowel::ALL.len())])
}

pub fn generate_utterance(speaker: &SpeakerSpec, seed: u64) -> Result<UtteranceRecord> {
    let vowels = draw_vowels(seed);
    let mut samples = Vec::with_capacity((SEGMENTS as f64 * SEGMENT_S * SAMPLE_RATE as f64) as usize);
    for (k, v) in vowels.iter().enumerate() {
        let seg = synth_vowel_segment(speaker, &v.spec(), SEGMENT_S, utterance_seed(seed, k as u64))?;
        samples.extend_from_slice(seg.samples());
    }
    Ok(UtteranceRecord { signal: Signal::new(samples, SAMPLE_RATE)?, speaker_id: speaker.id, vowels })
}
