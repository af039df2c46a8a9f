use serde::{Deserialize, Serialize};

use crate::dsp::{ewt::ewt_decompose, fd::fd_decompose, Signal};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fd,
    Ewt,
}

/// How surplus detected peaks are folded down to `C` bands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeStrategy {
    /// Keep the lowest bands intact, fold everything above into the top band.
    MergeHighFrequency,
    /// Repeatedly fuse the closest pair of neighbouring peak groups.
    MergeNearestNeighbor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecompositionConfig {
    pub method: Method,
    pub components: usize,
    pub fd_band_edges: Vec<f64>,
    pub merge_strategy: MergeStrategy,
    pub peak_prominence: f64,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        Self {
            method: Method::Fd,
            components: 3,
            fd_band_edges: vec![0.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0],
            merge_strategy: MergeStrategy::MergeNearestNeighbor,
            peak_prominence: 0.35,
        }
    }
}

impl DecompositionConfig {
    pub fn ewt(components: usize) -> Self {
        Self { method: Method::Ewt, components, ..Self::default() }
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyq = sample_rate as f64 / 2.0;
        if self.components < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 components, got {}", self.components)));
        }
        if !(self.peak_prominence > 0.0 && self.peak_prominence < 1.0) {
            return Err(Error::InvalidArgument(format!("peak prominence {} outside (0, 1)", self.peak_prominence)));
        }
        if self.method == Method::Fd {
            let e = &self.fd_band_edges;
            if e.len() < self.components + 1 {
                return Err(Error::InvalidArgument(format!(
                    "{} band edges cannot hold {} components",
                    e.len(),
                    self.components
                )));
            }
            if e.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidArgument("band edges must be strictly increasing".into()));
            }
            if e[0] < 0.0 || *e.last().unwrap() > nyq {
                return Err(Error::InvalidArgument(format!("band edges must lie within [0, {nyq}] Hz")));
            }
        }
        Ok(())
    }
}

/// The original signal and its `C` components.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentSet {
    pub original: Signal,
    pub components: Vec<Signal>,
    /// Pass band of each component in Hz.
    pub bands: Vec<(f64, f64)>,
}

impl ComponentSet {
    /// Original first, then components: the `C+1` views.
    pub fn views(&self) -> impl Iterator<Item = &Signal> {
        std::iter::once(&self.original).chain(self.components.iter())
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }
}

pub fn decompose(signal: &Signal, config: &DecompositionConfig) -> Result<ComponentSet> {
    match config.method {
        Method::Fd => fd_decompose(signal, config),
        Method::Ewt => ewt_decompose(signal, config),
    }
}
