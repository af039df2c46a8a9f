use std::fs;
use std::path::{Path, PathBuf};

use decvae::dsp::DecompositionConfig;
use decvae::metrics::ClassifierKind;
use decvae::model::{EncoderConfig, TrainingConfig};
use decvae::simvowels::{DatasetConfig, Split};
use serde::{Deserialize, Serialize};

use crate::error::{user, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Dataset directory holding `manifest.csv`.
    pub dir: Option<PathBuf>,
    pub n_utterances: usize,
    pub n_speakers: usize,
    pub split_weights: [usize; 3],
    /// Caps on the number of utterances read from each split.
    pub max_train: Option<usize>,
    pub max_dev: Option<usize>,
    pub max_eval: Option<usize>,
    /// Split embedded by `embed` and `traverse`.
    pub split: Split,
}

impl Default for DataSection {
    fn default() -> Self {
        let d = DatasetConfig::default();
        Self {
            dir: None,
            n_utterances: d.n_utterances,
            n_speakers: d.n_speakers,
            split_weights: d.split_weights,
            max_train: None,
            max_dev: None,
            max_eval: None,
            split: Split::Test,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub metrics: Vec<String>,
    /// Factor columns to classify with `classifier`.
    pub tasks: Vec<String>,
    pub classifier: ClassifierKind,
    pub folds: usize,
    pub seeds: Vec<u64>,
    pub bins: usize,
    /// Inverse L1 strength of the DCI probes.
    pub dci_c: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            metrics: ["dci", "mi", "gcn", "modexp", "irs"].map(String::from).to_vec(),
            tasks: Vec::new(),
            classifier: ClassifierKind::Logistic,
            folds: 5,
            seeds: (0..5).collect(),
            bins: 30,
            dci_c: 1.0,
        }
    }
}

/// Files consumed by a command.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    pub wav: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub factors: Option<PathBuf>,
    pub log: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub data: DataSection,
    pub inputs: InputSection,
    pub decomposition: DecompositionConfig,
    pub encoder: EncoderConfig,
    pub training: TrainingConfig,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            data: DataSection::default(),
            inputs: InputSection::default(),
            decomposition: DecompositionConfig::default(),
            encoder: EncoderConfig::desk(),
            training: TrainingConfig::default(),
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| user(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| user(format!("{}: {e}", path.display())))
    }

    /// Applies the global seed to every seeded stage.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.training.seed = seed;
    }

    pub fn dataset(&self) -> DatasetConfig {
        DatasetConfig {
            n_utterances: self.data.n_utterances,
            n_speakers: self.data.n_speakers,
            seed: self.seed,
            split_weights: self.data.split_weights,
        }
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string_pretty(self).map_err(|e| crate::error::CliError::Internal(e.to_string()))
    }

    /// Writes `resolved_<command>.toml` into the output directory.
    pub fn persist(&self, command: &str) -> CliResult<PathBuf> {
        let path = self.out.join(format!("resolved_{command}.toml"));
        decvae::fsutil::atomic_write_str(&path, &self.to_toml()?)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig::default();
        c.encoder.aggregation = decvae::model::Aggregation::SingleSubspace(0);
        c.data.dir = Some("data".into());
        let text = c.to_toml().unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), c);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c: RunConfig = toml::from_str("seed = 3\n[training]\nbeta = 10.0\n").unwrap();
        assert_eq!(c.training.beta, 10.0);
        assert_eq!(c.training.t_max, 150);
        assert_eq!(c.encoder, EncoderConfig::desk());
        assert!(toml::from_str::<RunConfig>("bogus = 1\n").is_err());
    }
}
