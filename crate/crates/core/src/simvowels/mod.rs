//! Synthetic vowel corpus: speakers are vocal-tract scalings, vowels are
//! sums of three narrow-band formant carriers.

mod dataset;
mod synth;

pub use dataset::{
    generate_dataset, generate_in_memory, read_manifest, write_manifest, DatasetConfig, ManifestRow, Split,
};
pub use synth::{
    build_speaker_bank, draw_vowels, generate_utterance, synth_vowel_segment, utterance_seed, SpeakerSpec,
    UtteranceRecord, SEGMENTS, SEGMENT_S,
};

use serde::{Deserialize, Serialize};

pub const SAMPLE_RATE: u32 = 16_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Vowel {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "e")]
    E,
    #[serde(rename = "I")]
    I,
    #[serde(rename = "aw")]
    Aw,
    #[serde(rename = "u")]
    U,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Formant {
    pub centre_hz: f64,
    pub bandwidth_hz: f64,
    pub amplitude: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VowelSpec {
    pub vowel: Vowel,
    pub formants: [Formant; 3],
}

const BANDWIDTHS: [f64; 3] = [60.0, 90.0, 120.0];
const AMPLITUDES: [f64; 3] = [1.0, 0.6, 0.3];

impl Vowel {
    pub const ALL: [Vowel; 5] = [Vowel::A, Vowel::E, Vowel::I, Vowel::Aw, Vowel::U];

    pub fn name(self) -> &'static str {
        match self {
            Vowel::A => "a",
            Vowel::E => "e",
            Vowel::I => "I",
            Vowel::Aw => "aw",
            Vowel::U => "u",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn centres(self) -> [f64; 3] {
        match self {
            Vowel::A => [730.0, 1090.0, 2440.0],
            Vowel::E => [530.0, 1840.0, 2480.0],
            Vowel::I => [390.0, 1990.0, 2550.0],
            Vowel::Aw => [570.0, 840.0, 2410.0],
            Vowel::U => [300.0, 870.0, 2240.0],
        }
    }

    pub fn spec(self) -> VowelSpec {
        let c = self.centres();
        let formants = std::array::from_fn(|k| Formant {
            centre_hz: c[k],
            bandwidth_hz: BANDWIDTHS[k],
            amplitude: AMPLITUDES[k],
        });
        VowelSpec { vowel: self, formants }
    }
}

impl std::fmt::Display for Vowel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
