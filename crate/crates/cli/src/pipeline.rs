//! Dataset loading and labelled embedding shared by the commands.

use std::path::Path;

use decvae::dsp::{read_wav, Signal};
use decvae::metrics::{EmbeddingTable, FactorTable};
use decvae::model::features::prepare_sequences;
use decvae::model::{embed_features, DecVae};
use decvae::simvowels::{read_manifest, Split, UtteranceRecord, Vowel, SEGMENTS, SEGMENT_S};

use crate::error::{user, CliResult};

/// One labelled utterance.
#[derive(Clone, Debug)]
pub struct Utterance {
    pub signal: Signal,
    pub speaker: usize,
    pub vowels: [Vowel; SEGMENTS],
}

impl From<UtteranceRecord> for Utterance {
    fn from(r: UtteranceRecord) -> Self {
        Self { signal: r.signal, speaker: r.speaker_id, vowels: r.vowels }
    }
}

/// Reads up to `limit` utterances of `split` from a dataset directory.
pub fn load_split(dir: &Path, split: Split, limit: Option<usize>) -> CliResult<Vec<Utterance>> {
    let manifest = dir.join("manifest.csv");
    if !manifest.is_file() {
        return Err(user(format!("no manifest at {}", manifest.display())));
    }
    read_manifest(&manifest)?
        .into_iter()
        .filter(|r| r.split == split)
        .take(limit.unwrap_or(usize::MAX))
        .map(|r| {
            Ok(Utterance { signal: read_wav(&dir.join(&r.path))?, speaker: r.speaker_id, vowels: r.vowels() })
        })
        .collect()
}

/// Embeddings with aligned factor tables at both time scales.
#[derive(Clone, Debug, PartialEq)]
pub struct Labelled {
    pub frames: EmbeddingTable,
    /// `vowel`, `speaker` per frame row.
    pub frame_factors: FactorTable,
    pub sequences: EmbeddingTable,
    /// `speaker` per sequence row.
    pub sequence_factors: FactorTable,
}

/// Cuts utterances into model-length pieces, embeds them and labels every
/// frame with the vowel sounding at its start.
pub fn embed_utterances(model: &DecVae, utts: &[Utterance]) -> CliResult<Labelled> {
    let tc = &model.training;
    let signals: Vec<Signal> = utts.iter().map(|u| u.signal.clone()).collect();
    let pieces = prepare_sequences(&signals, tc.d_min, tc.d_max);
    if pieces.is_empty() {
        return Err(user("no utterance is long enough to embed"));
    }
    let pipeline = model.pipeline()?;
    let feats = pipeline.extract_all(&pieces.iter().map(|p| p.signal.clone()).collect::<Vec<_>>())?;
    let emb = embed_features(model, &feats)?;
    let sr = model.sample_rate as f64;
    let frame_len = (tc.frame_ms * sr / 1000.0).round() as usize;
    let segment = (SEGMENT_S * sr) as usize;
    let mut vowel = Vec::with_capacity(emb.frames.len());
    let mut speaker = Vec::with_capacity(emb.frames.len());
    for &(seq, frame) in &emb.frame_index {
        let p = &pieces[seq];
        let u = &utts[p.source];
        let at = p.start_sample + frame * frame_len;
        vowel.push(u.vowels[(at / segment).min(SEGMENTS - 1)].name().to_string());
        speaker.push(u.speaker);
    }
    let seq_speaker: Vec<usize> = pieces.iter().map(|p| utts[p.source].speaker).collect();
    let mut frame_factors = FactorTable::from_labels(vec!["vowel".into()], vec![vowel])?;
    frame_factors.push_codes("speaker", speaker)?;
    Ok(Labelled {
        frames: EmbeddingTable::new(emb.frames)?,
        frame_factors,
        sequences: EmbeddingTable::new(emb.sequences)?,
        sequence_factors: FactorTable::from_codes(vec!["speaker".into()], vec![seq_speaker])?,
    })
}
