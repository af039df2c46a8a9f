use super::config::EncoderConfig;
use super::params::{head_names, ParamStore};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// Parameters placed on a tape, addressable by name.
pub struct Bound<'a> {
    store: &'a ParamStore,
    vars: Vec<Var>,
}

impl<'a> Bound<'a> {
    pub fn new(tape: &mut Tape, store: &'a ParamStore) -> Self {
        Self { vars: store.bind(tape), store }
    }

    pub fn var(&self, name: &str) -> Result<Var> {
        Ok(self.vars[self.store.position(name)?])
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

/// Shared encoder and hidden projector: `[N, T, M]` Mel rows to `[N, d]`.
pub fn encode_hidden(tape: &mut Tape, p: &Bound, cfg: &EncoderConfig, x: Var) -> Result<Var> {
    let mut y = x;
    for (l, c) in cfg.conv_layers.iter().enumerate() {
        y = tape.conv1d(y, p.var(&format!("conv{l}.w"))?, Some(p.var(&format!("conv{l}.b"))?), c.stride, c.kernel / 2)?;
        y = tape.layer_norm(y, p.var(&format!("conv{l}.ln.g"))?, p.var(&format!("conv{l}.ln.b"))?)?;
        y = tape.gelu(y);
    }
    let v = tape.linear(y, p.var("proj.w")?, Some(p.var("proj.b")?))?;
    let pooled = tape.mean_pool(v)?;
    let h = tape.linear(pooled, p.var("hidden.w")?, Some(p.var("hidden.b")?))?;
    let h = tape.gelu(h);
    check_finite(tape, h, "hidden embedding")?;
    Ok(h)
}

/// Latent head of one view: `(mu, logvar)` with logvar clamped to `[-20, 20]`.
pub fn latent_head(tape: &mut Tape, p: &Bound, prefix: &str, view: usize, h: Var) -> Result<(Var, Var)> {
    let (mw, mb, lw, lb) = head_names(prefix, view);
    let mu = tape.linear(h, p.var(&mw)?, Some(p.var(&mb)?))?;
    let lv = tape.linear(h, p.var(&lw)?, Some(p.var(&lb)?))?;
    Ok((mu, tape.clamp(lv, -20.0, 20.0)))
}

/// Sequence-branch projector applied to pooled frame embeddings.
pub fn sequence_hidden(tape: &mut Tape, p: &Bound, pooled: Var) -> Result<Var> {
    let u = tape.linear(pooled, p.var("s.hidden.w")?, Some(p.var("s.hidden.b")?))?;
    Ok(tape.gelu(u))
}

/// Mean of the first `valid[b]` frame rows of every `(view, item)` block of
/// `h` (`[V·B·F, d]`, ordered view, item, frame), giving `[V·B, d]`.
pub fn pool_frames(tape: &mut Tape, h: Var, views: usize, valid: &[usize]) -> Result<Var> {
    let n = tape.shape(h)[0];
    let b = valid.len();
    let blocks = views * b;
    if blocks == 0 || n % blocks != 0 {
        return Err(Error::shape("pool_frames", format!("{n} rows for {views} views × {b} items")));
    }
    let f = n / blocks;
    let mut pool = vec![0.0; blocks * n];
    for c in 0..views {
        for (item, &nv) in valid.iter().enumerate() {
            let row = c * b + item;
            let nv = nv.clamp(1, f);
            for fr in 0..nv {
                pool[row * n + row * f + fr] = 1.0 / nv as f64;
            }
        }
    }
    // a constant averaging matrix keeps padded frames out of the mean
    let pool = tape.constant(vec![blocks, n], pool)?;
    tape.linear(pool, h, None)
}

fn check_finite(tape: &Tape, v: Var, what: &str) -> Result<()> {
    if let Some(i) = tape.value(v).iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("{what} entry {i} of shape {:?}", tape.shape(v))));
    }
    Ok(())
}
