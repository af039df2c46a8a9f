//! The minimised training objective for one batch.

use super::config::{EncoderConfig, TrainingConfig};
use super::features::MaskSpec;
use super::loss::{loss_ortho, loss_prior, loss_recon};
use super::network::{encode_hidden, latent_head, pool_frames, sequence_hidden, Bound};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Tape handles of every monitored quantity.
pub struct ObjectiveVars {
    pub total: Var,
    pub recon: Option<Var>,
    pub ortho: Option<Var>,
    pub prior: Var,
    pub recon_s: Option<Var>,
    pub ortho_s: Option<Var>,
    pub prior_s: Option<Var>,
    pub jsd_pos: Vec<Var>,
    pub jsd_neg: Vec<Var>,
}

/// Scalar read-out of [`ObjectiveVars`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub recon: f64,
    pub ortho: f64,
    /// Unweighted KL, both branches.
    pub prior: f64,
    pub jsd_pos_mean: f64,
    pub jsd_neg_mean: f64,
}

impl ObjectiveVars {
    pub fn read(&self, tape: &Tape) -> LossBreakdown {
        let val = |v: Option<Var>| v.map(|v| tape.scalar(v)).unwrap_or(0.0);
        let mean_of = |vs: &[Var]| {
            let (s, n) = vs.iter().fold((0.0, 0usize), |(s, n), &v| {
                let x = tape.value(v);
                (s + x.iter().sum::<f64>(), n + x.len())
            });
            if n == 0 {
                0.0
            } else {
                s / n as f64
            }
        };
        LossBreakdown {
            total: tape.scalar(self.total),
            recon: val(self.recon) + val(self.recon_s),
            ortho: val(self.ortho) + val(self.ortho_s),
            prior: tape.scalar(self.prior) + val(self.prior_s),
            jsd_pos_mean: mean_of(&self.jsd_pos),
            jsd_neg_mean: mean_of(&self.jsd_neg),
        }
    }
}

fn add_opt(tape: &mut Tape, acc: Var, term: Option<Var>, weight: f64) -> Result<Var> {
    match term {
        Some(t) => {
            let t = if weight == 1.0 { t } else { tape.scale(t, weight) };
            tape.add(acc, t)
        }
        None => Ok(acc),
    }
}

/// Recon/ortho (when enabled) and prior terms over aligned view rows.
fn branch(
    tape: &mut Tape,
    p: &Bound,
    enc: &EncoderConfig,
    tc: &TrainingConfig,
    prefix: &str,
    views: &[Var],
) -> Result<(Option<Var>, Option<Var>, Var, Vec<Var>, Vec<Var>)> {
    let c = enc.components;
    let (recon, ortho, pos, neg) = if tc.contrastive {
        let r = loss_recon(tape, views, &tc.pos_weights(c), tc.epsilon)?;
        let o = loss_ortho(tape, views, &tc.neg_weights(c), tc.epsilon)?;
        (Some(r.loss), Some(o.loss), r.jsd, o.jsd)
    } else {
        (None, None, Vec::new(), Vec::new())
    };
    let mut mus = Vec::with_capacity(views.len());
    let mut lvs = Vec::with_capacity(views.len());
    for (view, &h) in views.iter().enumerate() {
        let (mu, lv) = latent_head(tape, p, prefix, view, h)?;
        mus.push(mu);
        lvs.push(lv);
    }
    let prior = loss_prior(tape, &mus, &lvs)?;
    Ok((recon, ortho, prior, pos, neg))
}

/// Builds the full objective for a batch laid out `[view][item][frame]`.
///
/// `x` is `[V·B·F, T, M]`; `valid[b]` is the number of real frames of item `b`
/// and `mask` picks the frames entering the frame-level terms.
pub fn batch_objective(
    tape: &mut Tape,
    p: &Bound,
    enc: &EncoderConfig,
    tc: &TrainingConfig,
    x: &Tensor,
    valid: &[usize],
    mask: &MaskSpec,
) -> Result<ObjectiveVars> {
    let v = enc.views();
    let b = valid.len();
    if b == 0 || mask.selected.len() != b {
        return Err(Error::shape("batch_objective", format!("{} items, {} mask rows", b, mask.selected.len())));
    }
    let n = x.shape()[0];
    if n % (v * b) != 0 {
        return Err(Error::shape("batch_objective", format!("{n} rows not divisible by {v} views × {b} items")));
    }
    let f = n / (v * b);
    if mask.count() == 0 || mask.selected.iter().zip(valid).any(|(m, &nv)| m.iter().any(|&i| i >= nv.min(f))) {
        return Err(Error::InvalidArgument("mask must select valid frames".into()));
    }
    let xv = tape.leaf(x);
    let h = encode_hidden(tape, p, enc, xv)?;

    let mut views = Vec::with_capacity(v);
    for c in 0..v {
        let idx: Vec<usize> = mask
            .selected
            .iter()
            .enumerate()
            .flat_map(|(item, frames)| frames.iter().map(move |&fr| (c * b + item) * f + fr))
            .collect();
        views.push(tape.gather_rows(h, &idx)?);
    }
    let (recon, ortho, prior, jsd_pos, jsd_neg) = branch(tape, p, enc, tc, "", &views)?;
    let mut total = tape.scale(prior, tc.beta);
    total = add_opt(tape, total, recon, 1.0)?;
    total = add_opt(tape, total, ortho, 1.0)?;

    let (mut recon_s, mut ortho_s, mut prior_s) = (None, None, None);
    if enc.dual {
        let pooled = pool_frames(tape, h, v, valid)?;
        let u = sequence_hidden(tape, p, pooled)?;
        let mut sviews = Vec::with_capacity(v);
        for c in 0..v {
            sviews.push(tape.slice_rows(u, c * b, b)?);
        }
        // divergence means are reported for the frame branch only
        let (r, o, pr, _, _) = branch(tape, p, enc, tc, "s.", &sviews)?;
        total = add_opt(tape, total, r, 1.0)?;
        total = add_opt(tape, total, o, 1.0)?;
        total = add_opt(tape, total, Some(pr), tc.beta_s)?;
        recon_s = r;
        ortho_s = o;
        prior_s = Some(pr);
    }
    Ok(ObjectiveVars { total, recon, ortho, prior, recon_s, ortho_s, prior_s, jsd_pos, jsd_neg })
}
