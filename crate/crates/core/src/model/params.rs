use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::EncoderConfig;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Named trainable tensors in a fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self { names: Vec::new(), tensors: Vec::new(), index: HashMap::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        let name = name.into();
        let t = t.with_grad();
        match self.index.get(&name) {
            Some(&i) => self.tensors[i] = t,
            None => {
                self.index.insert(name.clone(), self.names.len());
                self.names.push(name);
                self.tensors.push(t);
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.tensors[i])
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.index.get(name).copied().ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    /// Puts every parameter on the tape, returning vars in store order.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.tensors.iter().map(|t| tape.leaf(t)).collect()
    }

    /// Rounds every value through `f32`, the checkpoint precision.
    pub fn round_to_f32(&mut self) {
        for t in &mut self.tensors {
            t.data_mut().iter_mut().for_each(|v| *v = *v as f32 as f64);
        }
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

fn he(rng: &mut ChaCha8Rng, shape: Vec<usize>, fan_in: usize) -> Tensor {
    let n: usize = shape.iter().product();
    let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
    Tensor::new(shape, (0..n).map(|_| dist.sample(rng)).collect()).expect("shape matches data")
}

pub fn head_names(prefix: &str, view: usize) -> (String, String, String, String) {
    (
        format!("{prefix}head{view}.mu.w"),
        format!("{prefix}head{view}.mu.b"),
        format!("{prefix}head{view}.logvar.w"),
        format!("{prefix}head{view}.logvar.b"),
    )
}

/// He-initialised parameters for the encoder, projector and latent heads.
pub fn init_params(cfg: &EncoderConfig, seed: u64) -> Result<ParamStore> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ParamStore::new();
    let mut cin = cfg.n_mels;
    for (l, c) in cfg.conv_layers.iter().enumerate() {
        p.insert(format!("conv{l}.w"), he(&mut rng, vec![c.kernel, cin, c.channels], c.kernel * cin));
        p.insert(format!("conv{l}.b"), Tensor::zeros(vec![c.channels]));
        p.insert(format!("conv{l}.ln.g"), Tensor::new(vec![c.channels], vec![1.0; c.channels])?);
        p.insert(format!("conv{l}.ln.b"), Tensor::zeros(vec![c.channels]));
        cin = c.channels;
    }
    p.insert("proj.w", he(&mut rng, vec![cin, cfg.v], cin));
    p.insert("proj.b", Tensor::zeros(vec![cfg.v]));
    p.insert("hidden.w", he(&mut rng, vec![cfg.v, cfg.d], cfg.v));
    p.insert("hidden.b", Tensor::zeros(vec![cfg.d]));
    add_heads(&mut p, &mut rng, "", cfg);
    if cfg.dual {
        p.insert("s.hidden.w", he(&mut rng, vec![cfg.d, cfg.d], cfg.d));
        p.insert("s.hidden.b", Tensor::zeros(vec![cfg.d]));
        add_heads(&mut p, &mut rng, "s.", cfg);
    }
    Ok(p)
}

fn add_heads(p: &mut ParamStore, rng: &mut ChaCha8Rng, prefix: &str, cfg: &EncoderConfig) {
    for view in 0..cfg.views() {
        let (mw, mb, lw, lb) = head_names(prefix, view);
        p.insert(mw, he(rng, vec![cfg.d, cfg.z_dim], cfg.d));
        p.insert(mb, Tensor::zeros(vec![cfg.z_dim]));
        p.insert(lw, he(rng, vec![cfg.d, cfg.z_dim], cfg.d));
        p.insert(lb, Tensor::zeros(vec![cfg.z_dim]));
    }
}

/// True for parameters owned by the sequence branch.
pub fn is_sequence_param(name: &str) -> bool {
    name.starts_with("s.")
}
