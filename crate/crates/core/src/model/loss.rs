//! Divergence-based decomposition losses and the Gaussian prior term.

use std::f64::consts::LN_2;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// Jensen-Shannon divergence between `softmax(a)` and `softmax(b)`, divided by ln 2.
pub fn pairwise_jsd(a: &[f64], b: &[f64]) -> f64 {
    let lp = log_softmax(a);
    let lq = log_softmax(b);
    let mut s = 0.0;
    for (x, y) in lp.iter().zip(&lq) {
        let (p, q) = (x.exp(), y.exp());
        let lm = (0.5 * (p + q)).max(f64::MIN_POSITIVE).ln();
        s += 0.5 * (p * (x - lm) + q * (y - lm));
    }
    (s / LN_2).clamp(0.0, 1.0)
}

fn log_softmax(a: &[f64]) -> Vec<f64> {
    let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + a.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    a.iter().map(|v| v - lse).collect()
}

/// Row-wise normalised JSD from log-probabilities `[n, d]`, giving `[n]`.
pub fn jsd_rows(tape: &mut Tape, lp: Var, lq: Var) -> Result<Var> {
    let p = tape.exp(lp);
    let q = tape.exp(lq);
    let m = tape.add(p, q)?;
    let m = tape.scale(m, 0.5);
    let m = tape.clamp(m, f64::MIN_POSITIVE, 1.0);
    let lm = tape.log(m);
    let dp = tape.sub(lp, lm)?;
    let dq = tape.sub(lq, lm)?;
    let kp = tape.mul(p, dp)?;
    let kq = tape.mul(q, dq)?;
    let k = tape.add(kp, kq)?;
    let s = tape.sum_last(k);
    Ok(tape.scale(s, 0.5 / LN_2))
}

/// Binary cross-entropy of clamped divergences against 0 (`toward_one = false`) or 1.
fn bce(tape: &mut Tape, jsd: Var, toward_one: bool, eps: f64) -> Var {
    let s = tape.clamp(jsd, eps, 1.0 - eps);
    if toward_one {
        let l = tape.log(s);
        tape.neg(l)
    } else {
        let one_minus = tape.neg(s);
        let one_minus = tape.add_scalar(one_minus, 1.0);
        let l = tape.log(one_minus);
        tape.neg(l)
    }
}

/// A weighted loss and the per-pair divergence vectors behind it.
pub struct PairLoss {
    pub loss: Var,
    pub jsd: Vec<Var>,
}

fn weighted_pairs(
    tape: &mut Tape,
    views: &[Var],
    pairs: &[(usize, usize)],
    weights: &[f64],
    toward_one: bool,
    eps: f64,
) -> Result<PairLoss> {
    if weights.len() != pairs.len() {
        return Err(Error::shape("pair loss", format!("{} weights for {} pairs", weights.len(), pairs.len())));
    }
    let lps: Vec<Var> = views.iter().map(|&h| tape.log_softmax(h)).collect();
    let mut total: Option<Var> = None;
    let mut jsd = Vec::with_capacity(pairs.len());
    for (&(i, j), &w) in pairs.iter().zip(weights) {
        let s = jsd_rows(tape, lps[i], lps[j])?;
        jsd.push(s);
        let b = bce(tape, s, toward_one, eps);
        let m = tape.mean(b);
        let term = tape.scale(m, w);
        total = Some(match total {
            Some(t) => tape.add(t, term)?,
            None => term,
        });
    }
    let loss = match total {
        Some(t) => t,
        None => tape.constant(vec![1], vec![0.0])?,
    };
    Ok(PairLoss { loss, jsd })
}

/// Pulls each component embedding toward the original (`views[0]`).
/// Every view is `[n, d]` with rows aligned across views.
pub fn loss_recon(tape: &mut Tape, views: &[Var], w_pos: &[f64], eps: f64) -> Result<PairLoss> {
    let pairs: Vec<(usize, usize)> = (1..views.len()).map(|i| (i, 0)).collect();
    weighted_pairs(tape, views, &pairs, w_pos, false, eps)
}

/// Pushes every unordered pair of component embeddings apart.
pub fn loss_ortho(tape: &mut Tape, views: &[Var], w_neg: &[f64], eps: f64) -> Result<PairLoss> {
    let c = views.len().saturating_sub(1);
    if c < 2 {
        return Err(Error::InvalidArgument("orthogonality needs at least two components".into()));
    }
    weighted_pairs(tape, views, &component_pairs(c), w_neg, true, eps)
}

/// `(i, j)` with `1 ≤ i < j ≤ c`, in lexicographic order.
pub fn component_pairs(c: usize) -> Vec<(usize, usize)> {
    (1..=c).flat_map(|i| (i + 1..=c).map(move |j| (i, j))).collect()
}

/// KL of each diagonal Gaussian against N(0, I), summed over subspaces, averaged over rows.
pub fn loss_prior(tape: &mut Tape, mus: &[Var], logvars: &[Var]) -> Result<Var> {
    if mus.len() != logvars.len() || mus.is_empty() {
        return Err(Error::shape("loss_prior", format!("{} means vs {} log-variances", mus.len(), logvars.len())));
    }
    let mut acc: Option<Var> = None;
    for (&mu, &lv) in mus.iter().zip(logvars) {
        let e = tape.exp(lv);
        let m2 = tape.mul(mu, mu)?;
        let t = tape.add(e, m2)?;
        let t = tape.sub(t, lv)?;
        let t = tape.add_scalar(t, -1.0);
        let s = tape.sum_last(t);
        let s = tape.scale(s, 0.5);
        acc = Some(match acc {
            Some(a) => tape.add(a, s)?,
            None => s,
        });
    }
    Ok(tape.mean(acc.expect("non-empty")))
}

/// Closed-form KL(N(mu, exp(logvar)) ‖ N(0, I)).
pub fn gaussian_kl(mu: &[f64], logvar: &[f64]) -> f64 {
    mu.iter().zip(logvar).map(|(m, lv)| 0.5 * (lv.exp() + m * m - 1.0 - lv)).sum()
}
