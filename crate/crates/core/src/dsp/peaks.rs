use std::ops::Range;

/// Local maxima inside each bin interval that reach `prominence × interval max`.
///
/// A bin is a local maximum when it is strictly greater than its left
/// neighbour and no smaller than its right one, so plateaus report their first
/// bin and flat spectra report nothing. Empty intervals are skipped.
pub fn detect_spectral_peaks(magnitude: &[f64], intervals: &[Range<usize>], prominence: f64) -> Vec<usize> {
    let mut peaks = Vec::new();
    for iv in intervals {
        let lo = iv.start.min(magnitude.len());
        let hi = iv.end.min(magnitude.len());
        if lo >= hi {
            continue;
        }
        let top = magnitude[lo..hi].iter().cloned().fold(0.0, f64::max);
        if top <= 0.0 {
            continue;
        }
        let threshold = prominence * top;
        for k in lo..hi {
            let m = magnitude[k];
            let rises = if k > 0 { m > magnitude[k - 1] } else { magnitude.get(1).is_some_and(|&r| m > r) };
            let holds = match magnitude.get(k + 1) {
                Some(&r) => m >= r,
                None => k > 0 && m > magnitude[k - 1],
            };
            if rises && holds && m >= threshold {
                peaks.push(k);
            }
        }
    }
    peaks.sort_unstable();
    peaks.dedup();
    peaks
}

/// Converts Hz edges into consecutive bin ranges for a spectrum of `n_bins`.
pub fn hz_intervals(edges_hz: &[f64], bin_hz: f64, n_bins: usize) -> Vec<Range<usize>> {
    edges_hz
        .windows(2)
        .map(|w| {
            let lo = ((w[0] / bin_hz).round() as usize).min(n_bins);
            let hi = ((w[1] / bin_hz).round() as usize + 1).min(n_bins);
            lo..hi
        })
        .collect()
}
