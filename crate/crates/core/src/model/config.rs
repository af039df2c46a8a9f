use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

/// How the `C+1` latent subspaces are combined into the final representation.
/// Serialized as its label, e.g. `"single_subspace(0)"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Aggregation {
    SingleSubspace(usize),
    ConcatComponents,
    ConcatAll,
    /// Two-layer map to `K · z_dim` outputs.
    LearnedProjection(usize),
}

impl TryFrom<String> for Aggregation {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        Self::parse(&s).ok_or_else(|| format!("unknown aggregation '{s}'"))
    }
}

impl From<Aggregation> for String {
    fn from(a: Aggregation) -> String {
        a.label()
    }
}

impl Aggregation {
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        match s {
            "concat_all" => return Some(Self::ConcatAll),
            "concat_components" => return Some(Self::ConcatComponents),
            _ => {}
        }
        let arg = |prefix: &str| {
            s.strip_prefix(prefix)
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|r| r.trim().parse::<usize>().ok())
        };
        arg("single_subspace").map(Self::SingleSubspace).or_else(|| arg("learned_projection").map(Self::LearnedProjection))
    }

    pub fn label(&self) -> String {
        match self {
            Self::SingleSubspace(i) => format!("single_subspace({i})"),
            Self::ConcatComponents => "concat_components".into(),
            Self::ConcatAll => "concat_all".into(),
            Self::LearnedProjection(k) => format!("learned_projection({k})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub conv_layers: Vec<ConvSpec>,
    pub v: usize,
    pub d: usize,
    pub z_dim: usize,
    pub components: usize,
    pub n_mels: usize,
    pub aggregation: Aggregation,
    /// Adds the sequence branch (pooled frames, own projector and heads).
    pub dual: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl EncoderConfig {
    pub fn desk() -> Self {
        Self {
            conv_layers: vec![ConvSpec { channels: 64, kernel: 3, stride: 1 }; 3],
            v: 128,
            d: 128,
            z_dim: 16,
            components: 3,
            n_mels: 80,
            aggregation: Aggregation::ConcatAll,
            dual: true,
        }
    }

    /// Seven conv layers and 512-wide projections.
    pub fn paper() -> Self {
        Self {
            conv_layers: vec![ConvSpec { channels: 512, kernel: 3, stride: 1 }; 7],
            v: 512,
            d: 512,
            z_dim: 48,
            ..Self::desk()
        }
    }

    pub fn views(&self) -> usize {
        self.components + 1
    }

    /// Width of the aggregated representation.
    pub fn aggregated_dim(&self) -> usize {
        self.z_dim * self.aggregation_k()
    }

    pub fn aggregation_k(&self) -> usize {
        match self.aggregation {
            Aggregation::SingleSubspace(_) => 1,
            Aggregation::ConcatComponents => self.components,
            Aggregation::ConcatAll => self.components + 1,
            Aggregation::LearnedProjection(k) => k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.conv_layers.is_empty() {
            return bad("encoder needs at least one conv layer".into());
        }
        if self.conv_layers.iter().any(|c| c.channels == 0 || c.kernel == 0 || c.stride == 0) {
            return bad("conv layers need positive channels, kernel and stride".into());
        }
        if self.v == 0 || self.d == 0 || self.z_dim == 0 || self.n_mels == 0 {
            return bad("v, d, z_dim and n_mels must be positive".into());
        }
        if self.components < 2 {
            return bad(format!("need at least 2 components, got {}", self.components));
        }
        match self.aggregation {
            Aggregation::SingleSubspace(i) if i > self.components => {
                bad(format!("subspace {i} out of range 0..={}", self.components))
            }
            Aggregation::LearnedProjection(0) => bad("learned projection needs K ≥ 1".into()),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub beta: f64,
    pub beta_s: f64,
    /// Per-component weights; empty means all ones.
    pub w_pos: Vec<f64>,
    /// Per-pair weights in `(1,2), (1,3), .., (C-1,C)` order; empty means all ones.
    pub w_neg: Vec<f64>,
    pub l_ssl_pct: f64,
    /// Clamp applied to divergences before the cross-entropy.
    pub epsilon: f64,
    pub batch_seconds: f64,
    pub lr_z: f64,
    pub lr_s: f64,
    pub warmup_epochs: usize,
    pub t_max: usize,
    pub tau_warmup: usize,
    pub tau_delta: f64,
    pub tau_patience: usize,
    /// Sequences shorter than this many seconds are dropped.
    pub d_min: f64,
    /// Sequences are padded (or cut) to this many seconds.
    pub d_max: f64,
    pub frame_ms: f64,
    /// When false every view is the original signal (ablation).
    pub decompose: bool,
    /// When false the recon/ortho terms are left out of the objective (ablation).
    pub contrastive: bool,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            beta: 0.1,
            beta_s: 0.1,
            w_pos: Vec::new(),
            w_neg: Vec::new(),
            l_ssl_pct: 0.5,
            epsilon: 1e-4,
            batch_seconds: 60.0,
            lr_z: 8e-5,
            lr_s: 1e-4,
            warmup_epochs: 20,
            t_max: 150,
            tau_warmup: 100,
            tau_delta: 0.002,
            tau_patience: 5,
            d_min: 1.0,
            d_max: 4.0,
            frame_ms: 200.0,
            decompose: true,
            contrastive: true,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self, components: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.l_ssl_pct > 0.0 && self.l_ssl_pct <= 1.0) {
            return bad(format!("l_ssl_pct {} outside (0, 1]", self.l_ssl_pct));
        }
        if self.beta < 0.0 || self.beta_s < 0.0 {
            return bad("beta values must be non-negative".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return bad(format!("epsilon {} outside (0, 0.5)", self.epsilon));
        }
        if !(self.lr_z > 0.0 && self.lr_s > 0.0) {
            return bad("learning rates must be positive".into());
        }
        if self.t_max == 0 || self.frame_ms <= 0.0 || self.batch_seconds <= 0.0 {
            return bad("t_max, frame_ms and batch_seconds must be positive".into());
        }
        if !(self.d_min >= 0.0 && self.d_max > 0.0 && self.d_min <= self.d_max) {
            return bad(format!("sequence bounds d_min {} / d_max {} invalid", self.d_min, self.d_max));
        }
        if !self.w_pos.is_empty() && self.w_pos.len() != components {
            return bad(format!("w_pos has {} entries for {components} components", self.w_pos.len()));
        }
        let pairs = components * (components - 1) / 2;
        if !self.w_neg.is_empty() && self.w_neg.len() != pairs {
            return bad(format!("w_neg has {} entries for {pairs} pairs", self.w_neg.len()));
        }
        if self.w_pos.iter().chain(&self.w_neg).any(|w| *w < 0.0) {
            return bad("pair weights must be non-negative".into());
        }
        Ok(())
    }

    pub fn pos_weights(&self, components: usize) -> Vec<f64> {
        if self.w_pos.is_empty() {
            vec![1.0; components]
        } else {
            self.w_pos.clone()
        }
    }

    pub fn neg_weights(&self, components: usize) -> Vec<f64> {
        if self.w_neg.is_empty() {
            vec![1.0; components * (components - 1) / 2]
        } else {
            self.w_neg.clone()
        }
    }

    pub fn frames_per_sequence(&self) -> usize {
        (self.d_max * 1000.0 / self.frame_ms).ceil() as usize
    }
}
