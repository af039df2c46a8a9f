use crate::dsp::Signal;
use crate::error::{Error, Result};

pub fn samples_for_ms(ms: f64, sample_rate: u32) -> usize {
    (ms * sample_rate as f64 / 1000.0).round() as usize
}

/// Cuts a signal into frames of `frame_ms`, advancing by `hop_ms`.
/// The last partial frame is zero-padded; a signal shorter than one frame
/// yields a single padded frame.
pub fn frame_sequence(signal: &Signal, frame_ms: f64, hop_ms: f64) -> Result<Vec<Signal>> {
    if !(frame_ms > 0.0) || !(hop_ms > 0.0) {
        return Err(Error::InvalidArgument(format!("frame {frame_ms} ms / hop {hop_ms} ms must be positive")));
    }
    let sr = signal.sample_rate();
    let len = samples_for_ms(frame_ms, sr).max(1);
    let hop = samples_for_ms(hop_ms, sr).max(1);
    Ok(frame_samples(signal.samples(), len, hop)
        .into_iter()
        .map(|f| Signal::new(f, sr).expect("frames of a finite signal are finite"))
        .collect())
}

pub(crate) fn frame_samples(x: &[f64], len: usize, hop: usize) -> Vec<Vec<f64>> {
    let count = if x.len() <= len { 1 } else { 1 + (x.len() - len).div_ceil(hop) };
    (0..count)
        .map(|i| {
            let start = i * hop;
            let mut f = vec![0.0; len];
            let end = (start + len).min(x.len());
            if start < end {
                f[..end - start].copy_from_slice(&x[start..end]);
            }
            f
        })
        .collect()
}
