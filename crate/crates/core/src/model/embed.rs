use super::features::{assemble, SequenceFeatures};
use super::latent::{aggregate_subspaces, LearnedProjection};
use super::network::{encode_hidden, latent_head, pool_frames, sequence_hidden, Bound};
use super::{Aggregation, DecVae};
use crate::autodiff::Tape;
use crate::error::{Error, Result};

const CHUNK: usize = 8;

/// Posterior-mean representations.
#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    /// One aggregated row per valid frame, in sequence then frame order.
    pub frames: Vec<Vec<f64>>,
    /// `(sequence, frame)` of every frame row.
    pub frame_index: Vec<(usize, usize)>,
    /// One row per sequence: the sequence branch when present, otherwise
    /// the mean of the sequence's frame rows.
    pub sequences: Vec<Vec<f64>>,
}

pub fn embed_features(model: &DecVae, items: &[SequenceFeatures]) -> Result<Embeddings> {
    let enc = &model.encoder;
    let v = enc.views();
    let projection = match enc.aggregation {
        Aggregation::LearnedProjection(k) => {
            Some(LearnedProjection::new(v * enc.z_dim, k * enc.z_dim, model.training.seed))
        }
        _ => None,
    };
    let mut out = Embeddings { frames: Vec::new(), frame_index: Vec::new(), sequences: Vec::new() };
    for (ci, chunk) in items.chunks(CHUNK).enumerate() {
        let refs: Vec<&SequenceFeatures> = chunk.iter().collect();
        let valid: Vec<usize> = refs.iter().map(|s| s.valid).collect();
        let b = refs.len();
        let f = refs[0].frames;
        let x = assemble(&refs, &model.norm)?;
        let mut tape = Tape::new();
        let p = Bound::new(&mut tape, &model.params);
        let xv = tape.leaf(&x);
        let h = encode_hidden(&mut tape, &p, enc, xv)?;
        let mut mus = Vec::with_capacity(v);
        for c in 0..v {
            let rows = tape.slice_rows(h, c * b * f, b * f)?;
            mus.push(latent_head(&mut tape, &p, "", c, rows)?.0);
        }
        let z = enc.z_dim;
        let mut seq_frames: Vec<Vec<Vec<f64>>> = vec![Vec::new(); b];
        for (item, &nv) in valid.iter().enumerate() {
            for fr in 0..nv {
                let r = item * f + fr;
                let subs: Vec<&[f64]> = mus.iter().map(|&m| &tape.value(m)[r * z..(r + 1) * z]).collect();
                let row = aggregate_subspaces(&subs, enc, projection.as_ref())?;
                seq_frames[item].push(row.clone());
                out.frames.push(row);
                out.frame_index.push((ci * CHUNK + item, fr));
            }
        }
        if enc.dual {
            let pooled = pool_frames(&mut tape, h, v, &valid)?;
            let u = sequence_hidden(&mut tape, &p, pooled)?;
            let mut smus = Vec::with_capacity(v);
            for c in 0..v {
                let rows = tape.slice_rows(u, c * b, b)?;
                smus.push(latent_head(&mut tape, &p, "s.", c, rows)?.0);
            }
            for item in 0..b {
                let subs: Vec<&[f64]> = smus.iter().map(|&m| &tape.value(m)[item * z..(item + 1) * z]).collect();
                out.sequences.push(aggregate_subspaces(&subs, enc, projection.as_ref())?);
            }
        } else {
            for rows in seq_frames {
                let n = rows.len().max(1) as f64;
                let mut mean = vec![0.0; rows.first().map_or(0, Vec::len)];
                for r in &rows {
                    mean.iter_mut().zip(r).for_each(|(a, b)| *a += b / n);
                }
                out.sequences.push(mean);
            }
        }
    }
    if out.frames.iter().flatten().chain(out.sequences.iter().flatten()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("embedding".into()));
    }
    Ok(out)
}
