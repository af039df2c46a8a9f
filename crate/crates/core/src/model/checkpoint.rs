//! One JSON header line followed by little-endian `f32` parameter payloads.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{EncoderConfig, TrainingConfig};
use super::features::FeatureNorm;
use super::params::ParamStore;
use super::DecVae;
use crate::autodiff::Tensor;
use crate::dsp::DecompositionConfig;
use crate::error::{Error, Result};
use crate::fsutil::atomic_write;

const FORMAT: &str = "decvae-checkpoint";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    encoder: EncoderConfig,
    training: TrainingConfig,
    decomposition: DecompositionConfig,
    feature_norm: FeatureNorm,
    sample_rate: u32,
    seed: u64,
    epoch: usize,
    params: Vec<Entry>,
}

pub fn encode_checkpoint(model: &DecVae) -> Result<Vec<u8>> {
    let mut params = Vec::with_capacity(model.params.len());
    let mut payload = Vec::with_capacity(model.params.numel() * 4);
    for (name, t) in model.params.names().iter().zip(model.params.tensors()) {
        params.push(Entry { name: name.clone(), shape: t.shape().to_vec(), offset: payload.len() });
        for &v in t.data() {
            payload.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        encoder: model.encoder.clone(),
        training: model.training.clone(),
        decomposition: model.decomposition.clone(),
        feature_norm: model.norm.clone(),
        sample_rate: model.sample_rate,
        seed: model.training.seed,
        epoch: model.epoch,
        params,
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<DecVae> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Checkpoint("no header terminator".into()))?;
    let header: Header = serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported format {} v{}", header.format, header.version)));
    }
    let payload = &bytes[nl + 1..];
    let mut params = ParamStore::new();
    let mut expected_end = 0;
    for e in &header.params {
        let n: usize = e.shape.iter().product();
        let end = e.offset + 4 * n;
        if e.offset != expected_end || end > payload.len() {
            return Err(Error::Checkpoint(format!("parameter {} has a bad offset", e.name)));
        }
        let data = payload[e.offset..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        params.insert(e.name.clone(), Tensor::new(e.shape.clone(), data).map_err(|err| Error::Checkpoint(err.to_string()))?);
        expected_end = end;
    }
    if expected_end != payload.len() {
        return Err(Error::Checkpoint(format!("{} trailing payload bytes", payload.len() - expected_end)));
    }
    let reference = super::params::init_params(&header.encoder, 0)?;
    if reference.names() != params.names()
        || reference.tensors().iter().zip(params.tensors()).any(|(a, b)| a.shape() != b.shape())
    {
        return Err(Error::ConfigMismatch("checkpoint parameters do not match its encoder config".into()));
    }
    Ok(DecVae {
        encoder: header.encoder,
        training: header.training,
        decomposition: header.decomposition,
        norm: header.feature_norm,
        sample_rate: header.sample_rate,
        epoch: header.epoch,
        params,
    })
}

pub fn save_checkpoint(path: &Path, model: &DecVae) -> Result<()> {
    atomic_write(path, &encode_checkpoint(model)?)
}

pub fn load_checkpoint(path: &Path) -> Result<DecVae> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
