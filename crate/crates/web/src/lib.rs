//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Results cross the boundary as JSON strings so the page needs no glue
//! beyond what `wasm-bindgen` generates.

use decvae::dsp::spectrum::hann_magnitude;
use decvae::dsp::{component_correlation_matrix, decompose, pearson, DecompositionConfig, Signal};
use decvae::model::pairwise_jsd;
use decvae::simvowels::{synth_vowel_segment, SpeakerSpec, Vowel, SAMPLE_RATE};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Points per spectrum curve sent to the page.
const SPECTRUM_POINTS: usize = 256;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct Curve {
    hz: Vec<f64>,
    db: Vec<f64>,
}

/// Log-magnitude spectrum reduced to [`SPECTRUM_POINTS`] bins by taking the
/// maximum of each group.
fn curve(s: &Signal) -> Result<Curve, decvae::Error> {
    let spec = hann_magnitude(s)?;
    let mag = spec.magnitude();
    let step = mag.len().div_ceil(SPECTRUM_POINTS).max(1);
    let mut hz = Vec::new();
    let mut db = Vec::new();
    for (i, chunk) in mag.chunks(step).enumerate() {
        let peak = chunk.iter().cloned().fold(0.0, f64::max);
        hz.push((i * step) as f64 * spec.bin_hz());
        db.push(20.0 * peak.max(1e-9).log10());
    }
    Ok(Curve { hz, db })
}

#[derive(Serialize)]
struct Synthesis {
    sample_rate: u32,
    formants: Vec<f64>,
    samples: Vec<f64>,
    spectrum: Curve,
}

/// Synthesises `duration_ms` of a vowel (`a`, `e`, `I`, `aw`, `u`) for a
/// speaker with the given vocal tract factor and pitch.
pub fn synthesize_json(vowel: &str, vocal_tract_factor: f64, f0: f64, duration_ms: f64, seed: u32) -> Result<String, String> {
    let v = Vowel::from_name(vowel).ok_or_else(|| err(format!("unknown vowel '{vowel}'")))?;
    let speaker = SpeakerSpec { id: 0, vocal_tract_factor, f0 };
    let s = synth_vowel_segment(&speaker, &v.spec(), duration_ms / 1000.0, seed as u64).map_err(err)?;
    let out = Synthesis {
        sample_rate: SAMPLE_RATE,
        formants: v.centres().iter().map(|c| c * vocal_tract_factor).collect(),
        spectrum: curve(&s).map_err(err)?,
        samples: s.samples().to_vec(),
    };
    serde_json::to_string(&out).map_err(err)
}

#[derive(Serialize)]
struct Decomposition {
    bands_hz: Vec<(f64, f64)>,
    spectra: Vec<Curve>,
    /// Pearson correlation between views, original first.
    correlation: Vec<Vec<f64>>,
    mean_abs_correlation: f64,
    /// Relative L2 error of the component sum against the input.
    reconstruction_error: f64,
}

/// Decomposes `samples` with `fd` or `ewt` into `components` bands.
pub fn decompose_json(samples: &[f64], method: &str, components: usize) -> Result<String, String> {
    let cfg = match method {
        "fd" => DecompositionConfig { components, ..DecompositionConfig::default() },
        "ewt" => DecompositionConfig::ewt(components),
        _ => return Err(err(format!("unknown method '{method}'"))),
    };
    let s = Signal::new(samples.to_vec(), SAMPLE_RATE).map_err(err)?;
    let cs = decompose(&s, &cfg).map_err(err)?;
    let corr = component_correlation_matrix(&cs);
    let mut sum = vec![0.0; s.len()];
    for c in &cs.components {
        sum.iter_mut().zip(c.samples()).for_each(|(a, b)| *a += b);
    }
    let num: f64 = s.samples().iter().zip(&sum).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = s.samples().iter().map(|a| a * a).sum();
    let out = Decomposition {
        bands_hz: cs.bands.clone(),
        spectra: cs.components.iter().map(curve).collect::<Result<_, _>>().map_err(err)?,
        mean_abs_correlation: corr.mean_abs_off_diagonal(true),
        correlation: corr.values,
        reconstruction_error: if den > 0.0 { (num / den).sqrt() } else { 0.0 },
    };
    serde_json::to_string(&out).map_err(err)
}

#[derive(Serialize)]
struct Divergence {
    /// Jensen-Shannon divergence of the softmax distributions, in `[0, 1]`.
    jsd: f64,
    /// Pearson correlation of the raw vectors, absent when one is constant.
    correlation: Option<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
}

fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Normalised JSD between two latent vectors after softmax.
pub fn divergence_json(a: &[f64], b: &[f64]) -> Result<String, String> {
    if a.len() != b.len() || a.is_empty() {
        return Err(err(format!("vectors must be non-empty and equally long ({} vs {})", a.len(), b.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(err("vectors must be finite"));
    }
    let out = Divergence { jsd: pairwise_jsd(a, b), correlation: pearson(a, b), p: softmax(a), q: softmax(b) };
    serde_json::to_string(&out).map_err(err)
}

#[wasm_bindgen]
pub fn synthesize(vowel: &str, vocal_tract_factor: f64, f0: f64, duration_ms: f64, seed: u32) -> Result<String, JsError> {
    synthesize_json(vowel, vocal_tract_factor, f0, duration_ms, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn decompose_signal(samples: &[f64], method: &str, components: usize) -> Result<String, JsError> {
    decompose_json(samples, method, components).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn latent_divergence(a: &[f64], b: &[f64]) -> Result<String, JsError> {
    divergence_json(a, b).map_err(|e| JsError::new(&e))
}
