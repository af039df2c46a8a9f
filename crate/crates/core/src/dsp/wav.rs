use std::io::Cursor;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::dsp::{ComponentSet, Signal};
use crate::error::{Error, Result};
use crate::fsutil::atomic_write;

fn to_pcm16(x: f64) -> i16 {
    (x.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16
}

fn wav_err(path: &Path, source: hound::Error) -> Error {
    Error::Wav { path: path.to_path_buf(), source }
}

/// Reads a mono 16-bit PCM file into samples in `[-1, 1]`.
pub fn read_wav(path: &Path) -> Result<Signal> {
    let reader = WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != SampleFormat::Int {
        return Err(Error::InvalidArgument(format!(
            "{}: expected mono PCM16, found {} channel(s) at {} bits",
            path.display(),
            spec.channels,
            spec.bits_per_sample
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / i16::MAX as f64))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| wav_err(path, e))?;
    if samples.is_empty() {
        return Err(Error::EmptyDataset(format!("{} has no samples", path.display())));
    }
    Signal::new(samples, spec.sample_rate)
}

/// Encodes interleaved channels as PCM16 bytes.
pub fn encode_wav(channels: &[&[f64]], sample_rate: u32) -> Result<Vec<u8>> {
    let n = channels.first().map(|c| c.len()).unwrap_or(0);
    if channels.is_empty() || channels.iter().any(|c| c.len() != n) {
        return Err(Error::shape("encode_wav", "channels must be non-empty and equal length"));
    }
    let spec = WavSpec {
        channels: channels.len() as u16,
        sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut cursor = Cursor::new(Vec::new());
    let mut w = WavWriter::new(&mut cursor, spec).map_err(|e| wav_err(Path::new("<memory>"), e))?;
    for i in 0..n {
        for ch in channels {
            w.write_sample(to_pcm16(ch[i])).map_err(|e| wav_err(Path::new("<memory>"), e))?;
        }
    }
    w.finalize().map_err(|e| wav_err(Path::new("<memory>"), e))?;
    Ok(cursor.into_inner())
}

pub fn write_wav(path: &Path, signal: &Signal) -> Result<()> {
    let bytes = encode_wav(&[signal.samples()], signal.sample_rate())?;
    atomic_write(path, &bytes)
}

/// Channel 0 holds the original, channels `1..=C` the components.
pub fn write_components_wav(path: &Path, cs: &ComponentSet) -> Result<()> {
    let chans: Vec<&[f64]> = cs.views().map(|s| s.samples()).collect();
    let bytes = encode_wav(&chans, cs.original.sample_rate())?;
    atomic_write(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_within_quantisation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.wav");
        let x: Vec<f64> = (0..500).map(|i| 0.8 * (i as f64 * 0.05).sin()).collect();
        write_wav(&p, &Signal::new(x.clone(), 16_000).unwrap()).unwrap();
        let y = read_wav(&p).unwrap();
        assert_eq!(y.sample_rate(), 16_000);
        assert!(x.iter().zip(y.samples()).all(|(a, b)| (a - b).abs() <= 0.5 / 32767.0 + 1e-12));
    }

    #[test]
    fn multichannel_rejected_by_mono_reader() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.wav");
        let s = Signal::new(vec![0.1; 50], 8000).unwrap();
        let cs = ComponentSet { original: s.clone(), components: vec![s.clone(), s], bands: vec![(0.0, 1.0); 2] };
        write_components_wav(&p, &cs).unwrap();
        assert_eq!(WavReader::open(&p).unwrap().spec().channels, 3);
        assert!(read_wav(&p).is_err());
    }
}
