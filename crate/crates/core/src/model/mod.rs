//! The DecVAE inference network, its objective, training loop and checkpoints.

pub mod checkpoint;
pub mod config;
pub mod embed;
pub mod features;
pub mod latent;
pub mod loss;
pub mod network;
pub mod objective;
pub mod params;
pub mod schedule;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{Aggregation, ConvSpec, EncoderConfig, TrainingConfig};
pub use embed::{embed_features, Embeddings};
pub use features::{FeatureNorm, FeaturePipeline, MaskSpec, SequenceFeatures};
pub use latent::{aggregate_subspaces, reparameterize};
pub use loss::pairwise_jsd;
pub use params::{init_params, ParamStore};
pub use train::{train_decvae, EpochLog, StopReason, TrainOutcome};

use crate::dsp::DecompositionConfig;
use crate::error::Result;

/// A trained (or freshly initialised) model with everything needed to embed.
#[derive(Clone, Debug, PartialEq)]
pub struct DecVae {
    pub encoder: EncoderConfig,
    pub training: TrainingConfig,
    pub decomposition: DecompositionConfig,
    pub norm: FeatureNorm,
    pub sample_rate: u32,
    pub epoch: usize,
    pub params: ParamStore,
}

impl DecVae {
    pub fn new(
        encoder: EncoderConfig,
        training: TrainingConfig,
        decomposition: DecompositionConfig,
        norm: FeatureNorm,
        sample_rate: u32,
    ) -> Result<Self> {
        training.validate(encoder.components)?;
        let params = init_params(&encoder, training.seed)?;
        Ok(Self { encoder, training, decomposition, norm, sample_rate, epoch: 0, params })
    }

    pub fn pipeline(&self) -> Result<FeaturePipeline> {
        FeaturePipeline::new(&self.encoder, &self.training, &self.decomposition, self.sample_rate)
    }
}
