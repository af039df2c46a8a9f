use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synth::{build_speaker_bank, generate_utterance, utterance_seed, UtteranceRecord};
use super::Vowel;
use crate::dsp::wav::write_wav;
use crate::error::{Error, Result};
use crate::fsutil::atomic_write;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub n_utterances: usize,
    pub n_speakers: usize,
    pub seed: u64,
    /// Relative split sizes (train, dev, test).
    pub split_weights: [usize; 3],
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { n_utterances: 4800, n_speakers: 60, seed: 7, split_weights: [4000, 500, 300] }
    }
}

impl DatasetConfig {
    /// Number of utterances in each split; rounding leftovers go to test.
    pub fn split_sizes(&self) -> [usize; 3] {
        let total: usize = self.split_weights.iter().sum();
        if total == 0 || self.n_utterances == 0 {
            return [0, 0, 0];
        }
        let share = |w: usize| (self.n_utterances as f64 * w as f64 / total as f64).round() as usize;
        let train = share(self.split_weights[0]).min(self.n_utterances);
        let dev = share(self.split_weights[1]).min(self.n_utterances - train);
        [train, dev, self.n_utterances - train - dev]
    }

    pub fn split_of(&self, index: usize) -> Split {
        let [train, dev, _] = self.split_sizes();
        if index < train {
            Split::Train
        } else if index < train + dev {
            Split::Dev
        } else {
            Split::Test
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_utterances > 0 && (self.n_speakers == 0 || self.n_utterances % self.n_speakers != 0) {
            return Err(Error::InvalidArgument(format!(
                "{} utterances cannot be divided evenly over {} speakers",
                self.n_utterances, self.n_speakers
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub path: String,
    pub split: Split,
    pub speaker_id: usize,
    pub sec0: Vowel,
    pub sec1: Vowel,
    pub sec2: Vowel,
    pub sec3: Vowel,
}

impl ManifestRow {
    pub fn vowels(&self) -> [Vowel; 4] {
        [self.sec0, self.sec1, self.sec2, self.sec3]
    }
}

/// Utterance `i` belongs to speaker `i mod n_speakers`, so every speaker
/// appears in each split that holds at least `n_speakers` utterances.
pub fn generate_in_memory(config: &DatasetConfig) -> Result<Vec<(UtteranceRecord, Split)>> {
    config.validate()?;
    let bank = build_speaker_bank(config.n_speakers, config.seed);
    (0..config.n_utterances)
        .map(|i| {
            let speaker = &bank[i % config.n_speakers];
            let rec = generate_utterance(speaker, utterance_seed(config.seed, i as u64))?;
            Ok((rec, config.split_of(i)))
        })
        .collect()
}

/// Writes `wav/utt_NNNNN.wav` files and `manifest.csv` under `out_dir`.
/// On failure every file written so far is removed.
pub fn generate_dataset(out_dir: &Path, config: &DatasetConfig) -> Result<Vec<ManifestRow>> {
    config.validate()?;
    let bank = build_speaker_bank(config.n_speakers, config.seed);
    let wav_dir = out_dir.join("wav");
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| {
        fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;
        let mut rows = Vec::with_capacity(config.n_utterances);
        for i in 0..config.n_utterances {
            let speaker = &bank[i % config.n_speakers];
            let rec = generate_utterance(speaker, utterance_seed(config.seed, i as u64))?;
            let rel = format!("wav/utt_{i:05}.wav");
            let path = out_dir.join(&rel);
            write_wav(&path, &rec.signal)?;
            written.push(path);
            let [sec0, sec1, sec2, sec3] = rec.vowels;
            rows.push(ManifestRow { path: rel, split: config.split_of(i), speaker_id: speaker.id, sec0, sec1, sec2, sec3 });
        }
        write_manifest(&out_dir.join("manifest.csv"), &rows)?;
        Ok(rows)
    })();
    if result.is_err() {
        for p in &written {
            let _ = fs::remove_file(p);
        }
        let _ = fs::remove_dir(&wav_dir);
    }
    result
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(["path", "split", "speaker_id", "sec0", "sec1", "sec2", "sec3"])?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    atomic_write(path, &bytes)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
        _ => Error::Csv(e),
    })?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_split_sizes() {
        assert_eq!(DatasetConfig::default().split_sizes(), [4000, 500, 300]);
        let small = DatasetConfig { n_utterances: 480, ..DatasetConfig::default() };
        assert_eq!(small.split_sizes(), [400, 50, 30]);
    }

    #[test]
    fn uneven_speaker_division_rejected() {
        let cfg = DatasetConfig { n_utterances: 61, n_speakers: 60, ..DatasetConfig::default() };
        assert!(generate_in_memory(&cfg).is_err());
    }
}
