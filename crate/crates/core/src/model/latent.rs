//! Sampling and aggregation of latent subspaces.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::config::{Aggregation, EncoderConfig};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// `mu + exp(logvar / 2) · ε` with `ε ~ N(0, I)` drawn from `seed`.
pub fn reparameterize(mu: &[f64], logvar: &[f64], seed: u64) -> Result<Vec<f64>> {
    if mu.len() != logvar.len() {
        return Err(Error::shape("reparameterize", format!("{} vs {}", mu.len(), logvar.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| {
            let e: f64 = StandardNormal.sample(&mut rng);
            m + (0.5 * lv.clamp(-20.0, 20.0)).exp() * e
        })
        .collect())
}

/// Differentiable form with externally supplied noise `eps` (a constant).
pub fn reparameterize_var(tape: &mut Tape, mu: Var, logvar: Var, eps: Var) -> Result<Var> {
    let half = tape.scale(logvar, 0.5);
    let sd = tape.exp(half);
    let noise = tape.mul(sd, eps)?;
    tape.add(mu, noise)
}

/// Untrained two-layer map used by the learned-projection aggregation.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnedProjection {
    w1: Vec<f64>,
    w2: Vec<f64>,
    input: usize,
    hidden: usize,
    output: usize,
}

impl LearnedProjection {
    pub fn new(input: usize, output: usize, seed: u64) -> Self {
        let hidden = input.max(output);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_A66E_u64);
        let d1 = Normal::new(0.0, (2.0 / input as f64).sqrt()).expect("positive std");
        let d2 = Normal::new(0.0, (2.0 / hidden as f64).sqrt()).expect("positive std");
        let w1 = (0..input * hidden).map(|_| d1.sample(&mut rng)).collect();
        let w2 = (0..hidden * output).map(|_| d2.sample(&mut rng)).collect();
        Self { w1, w2, input, hidden, output }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.hidden];
        for (i, &xi) in x.iter().enumerate().take(self.input) {
            for (j, hj) in h.iter_mut().enumerate() {
                *hj += xi * self.w1[i * self.hidden + j];
            }
        }
        h.iter_mut().for_each(|v| *v = v.max(0.0));
        let mut out = vec![0.0; self.output];
        for (i, &hi) in h.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += hi * self.w2[i * self.output + j];
            }
        }
        out
    }
}

/// Combines per-view latents (`subspaces[view]`, each `z_dim` long) into `Z`.
pub fn aggregate_subspaces(
    subspaces: &[&[f64]],
    cfg: &EncoderConfig,
    projection: Option<&LearnedProjection>,
) -> Result<Vec<f64>> {
    if subspaces.len() != cfg.views() || subspaces.iter().any(|s| s.len() != cfg.z_dim) {
        return Err(Error::shape("aggregate", format!("expected {} subspaces of {}", cfg.views(), cfg.z_dim)));
    }
    Ok(match cfg.aggregation {
        Aggregation::SingleSubspace(i) => {
            let s = subspaces
                .get(i)
                .ok_or_else(|| Error::InvalidArgument(format!("subspace {i} out of range")))?;
            s.to_vec()
        }
        Aggregation::ConcatComponents => subspaces[1..].concat(),
        Aggregation::ConcatAll => subspaces.concat(),
        Aggregation::LearnedProjection(_) => {
            let proj = projection.ok_or_else(|| Error::InvalidArgument("learned projection missing".into()))?;
            proj.apply(&subspaces.concat())
        }
    })
}
