//! Filter decomposition: fixed intervals, peak picking, merging, IIR band-pass bank.

use crate::dsp::decompose::{ComponentSet, DecompositionConfig, MergeStrategy, Method};
use crate::dsp::iir::SosFilter;
use crate::dsp::peaks::{detect_spectral_peaks, hz_intervals};
use crate::dsp::spectrum::hann_magnitude;
use crate::dsp::Signal;
use crate::error::{Error, Result};

/// Prototype order of each band-pass filter.
pub const FD_ORDER: usize = 4;
/// Peaks weaker than this fraction of the global spectral maximum are noise.
pub const GLOBAL_PEAK_FLOOR: f64 = 0.05;
const MIN_EDGE_HZ: f64 = 20.0;
const MAX_EDGE_FRACTION: f64 = 0.95;

pub fn fd_decompose(signal: &Signal, config: &DecompositionConfig) -> Result<ComponentSet> {
    if config.method != Method::Fd {
        return Err(Error::InvalidArgument("fd_decompose called with a non-FD config".into()));
    }
    config.validate(signal.sample_rate())?;
    let bands = fd_bands(signal, config)?;
    let fs = signal.sample_rate() as f64;
    let nyq = fs / 2.0;
    let mut components = Vec::with_capacity(bands.len());
    for &(lo, hi) in &bands {
        let lo_c = lo.max(MIN_EDGE_HZ);
        let hi_c = hi.min(MAX_EDGE_FRACTION * nyq);
        let filt = SosFilter::butterworth_bandpass(FD_ORDER, lo_c, hi_c, fs)?;
        let pad = (3.0 * fs / lo_c).round() as usize;
        let y = filt.filtfilt(signal.samples(), pad)?;
        components.push(Signal::new(y, signal.sample_rate())?);
    }
    Ok(ComponentSet { original: signal.clone(), components, bands })
}

/// Merged pass bands (Hz) for a signal; exposed so callers can inspect the segmentation.
pub fn fd_bands(signal: &Signal, config: &DecompositionConfig) -> Result<Vec<(f64, f64)>> {
    let c = config.components;
    let needed = 3 * (2 * FD_ORDER + 1);
    if signal.len() <= needed {
        return Err(Error::SignalTooShort { len: signal.len(), needed });
    }
    let spec = hann_magnitude(signal)?;
    let mag = spec.magnitude();
    let bin_hz = spec.bin_hz();
    let edges = &config.fd_band_edges;
    let intervals = hz_intervals(edges, bin_hz, mag.len());
    let global = mag.iter().cloned().fold(0.0, f64::max);
    let peaks: Vec<f64> = detect_spectral_peaks(&mag, &intervals, config.peak_prominence)
        .into_iter()
        .filter(|&k| global > 0.0 && mag[k] >= GLOBAL_PEAK_FLOOR * global)
        .map(|k| k as f64 * bin_hz)
        .collect();

    if peaks.len() < c {
        return Ok(widest_fixed_bands(edges, c));
    }
    let groups = merge_peaks(&peaks, c, config.merge_strategy);
    let mut bands = Vec::with_capacity(c);
    let mut lo = edges[0];
    for k in 0..c {
        let hi = if k + 1 < c {
            let left = *groups[k].last().unwrap();
            let right = groups[k + 1][0];
            0.5 * (left + right)
        } else {
            *edges.last().unwrap()
        };
        bands.push((lo, hi));
        lo = hi;
    }
    Ok(bands)
}

fn widest_fixed_bands(edges: &[f64], c: usize) -> Vec<(f64, f64)> {
    let mut idx: Vec<usize> = (0..edges.len() - 1).collect();
    // widest first; stable so equal widths keep frequency order
    idx.sort_by(|&a, &b| {
        let wa = edges[a + 1] - edges[a];
        let wb = edges[b + 1] - edges[b];
        wb.partial_cmp(&wa).unwrap()
    });
    let mut chosen: Vec<usize> = idx.into_iter().take(c).collect();
    chosen.sort_unstable();
    chosen.into_iter().map(|i| (edges[i], edges[i + 1])).collect()
}

/// Groups sorted peak frequencies into exactly `c` contiguous groups.
pub fn merge_peaks(peaks: &[f64], c: usize, strategy: MergeStrategy) -> Vec<Vec<f64>> {
    let mut groups: Vec<Vec<f64>> = peaks.iter().map(|&p| vec![p]).collect();
    while groups.len() > c {
        let k = match strategy {
            MergeStrategy::MergeHighFrequency => groups.len() - 2,
            MergeStrategy::MergeNearestNeighbor => {
                let centre = |g: &Vec<f64>| g.iter().sum::<f64>() / g.len() as f64;
                let mut best = 0;
                let mut best_gap = f64::INFINITY;
                for k in 0..groups.len() - 1 {
                    let gap = centre(&groups[k + 1]) - centre(&groups[k]);
                    // strict comparison: equidistant cases fuse toward the lower frequency
                    if gap < best_gap {
                        best_gap = gap;
                        best = k;
                    }
                }
                best
            }
        };
        let right = groups.remove(k + 1);
        groups[k].extend(right);
    }
    groups
}
