//! Epoch loop: shuffling, masking, Adam updates, schedules and early stopping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{assemble, sample_mask, FeatureNorm, FeaturePipeline, SequenceFeatures};
use super::network::Bound;
use super::objective::{batch_objective, LossBreakdown};
use super::params::is_sequence_param;
use super::schedule::{lr_frame, lr_sequence, EarlyStopping};
use super::{DecVae, EncoderConfig, TrainingConfig};
use crate::autodiff::{adam_step, AdamState, Tape, Tensor};
use crate::dsp::{DecompositionConfig, Signal};
use crate::error::{Error, Result};
use crate::seed::mix_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_recon: f64,
    pub loss_ortho: f64,
    pub loss_prior: f64,
    pub jsd_pos_mean: f64,
    pub jsd_neg_mean: f64,
    #[serde(rename = "lr_Z")]
    pub lr_z: f64,
    #[serde(rename = "lr_S")]
    pub lr_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStopped,
    /// The loss became non-finite; the model holds the last good weights.
    NonFinite,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: DecVae,
    pub log: Vec<EpochLog>,
    pub val_losses: Vec<f64>,
    pub stop: StopReason,
}

pub fn batch_items(tc: &TrainingConfig) -> usize {
    ((tc.batch_seconds / tc.d_max).floor() as usize).max(1)
}

#[derive(Default)]
struct Running {
    sum: LossBreakdown,
    weight: f64,
}

impl Running {
    fn add(&mut self, b: &LossBreakdown, w: f64) {
        let s = &mut self.sum;
        s.total += w * b.total;
        s.recon += w * b.recon;
        s.ortho += w * b.ortho;
        s.prior += w * b.prior;
        s.jsd_pos_mean += w * b.jsd_pos_mean;
        s.jsd_neg_mean += w * b.jsd_neg_mean;
        self.weight += w;
    }

    fn mean(&self) -> LossBreakdown {
        let w = self.weight.max(f64::MIN_POSITIVE);
        let s = &self.sum;
        LossBreakdown {
            total: s.total / w,
            recon: s.recon / w,
            ortho: s.ortho / w,
            prior: s.prior / w,
            jsd_pos_mean: s.jsd_pos_mean / w,
            jsd_neg_mean: s.jsd_neg_mean / w,
        }
    }
}

/// Loss of `model` over `items` with masks drawn from `mask_seed`.
pub fn evaluate_loss(model: &DecVae, items: &[SequenceFeatures], mask_seed: u64) -> Result<LossBreakdown> {
    let mut rng = ChaCha8Rng::seed_from_u64(mask_seed);
    let mut run = Running::default();
    for chunk in items.chunks(batch_items(&model.training)) {
        let refs: Vec<&SequenceFeatures> = chunk.iter().collect();
        let valid: Vec<usize> = refs.iter().map(|s| s.valid).collect();
        let mask = sample_mask(&valid, model.training.l_ssl_pct, &mut rng);
        let x = assemble(&refs, &model.norm)?;
        let mut tape = Tape::new();
        let bound = Bound::new(&mut tape, &model.params);
        let obj = batch_objective(&mut tape, &bound, &model.encoder, &model.training, &x, &valid, &mask)?;
        run.add(&obj.read(&tape), chunk.len() as f64);
    }
    Ok(run.mean())
}

/// Trains `model` in place for at most `t_max` epochs.
pub fn train_decvae(mut model: DecVae, train: &[SequenceFeatures], dev: &[SequenceFeatures]) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(Error::EmptyDataset("training split has no sequences".into()));
    }
    let tc = model.training.clone();
    tc.validate(model.encoder.components)?;
    let is_s: Vec<bool> = model.params.names().iter().map(|n| is_sequence_param(n)).collect();
    let group = |s: bool, p: &[Tensor]| -> Vec<Tensor> {
        p.iter().zip(&is_s).filter(|(_, &g)| g == s).map(|(t, _)| t.clone()).collect()
    };
    let zs = group(false, model.params.tensors());
    let ss = group(true, model.params.tensors());
    let mut adam_z = AdamState::new(&zs.iter().collect::<Vec<_>>(), tc.lr_z);
    let mut adam_s = AdamState::new(&ss.iter().collect::<Vec<_>>(), tc.lr_s);

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(tc.seed, 0x7241));
    let dev_mask_seed = mix_seed(tc.seed, 0xDE5);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stopper = EarlyStopping::new(tc.tau_warmup, tc.tau_delta, tc.tau_patience);
    let mut log = Vec::new();
    let mut val_losses = Vec::new();
    let mut last_good = model.params.clone();
    let mut stop = StopReason::MaxEpochs;
    let b = batch_items(&tc);

    'epochs: for epoch in 0..tc.t_max {
        adam_z.lr = lr_frame(epoch, tc.lr_z, tc.warmup_epochs);
        adam_s.lr = lr_sequence(epoch, tc.lr_s, tc.warmup_epochs, tc.t_max);
        order.shuffle(&mut rng);
        let mut run = Running::default();
        for chunk in order.chunks(b) {
            let refs: Vec<&SequenceFeatures> = chunk.iter().map(|&i| &train[i]).collect();
            let valid: Vec<usize> = refs.iter().map(|s| s.valid).collect();
            let mask = sample_mask(&valid, tc.l_ssl_pct, &mut rng);
            let x = assemble(&refs, &model.norm)?;
            let mut tape = Tape::new();
            let bound = Bound::new(&mut tape, &model.params);
            let obj = batch_objective(&mut tape, &bound, &model.encoder, &tc, &x, &valid, &mask);
            let obj = match obj {
                Ok(o) => o,
                Err(Error::NonFinite(_)) => {
                    model.params = last_good;
                    stop = StopReason::NonFinite;
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            let vars = bound.vars().to_vec();
            let br = obj.read(&tape);
            if !br.total.is_finite() {
                model.params = last_good;
                stop = StopReason::NonFinite;
                break 'epochs;
            }
            let grads = tape.backward(obj.total)?;
            drop(tape);
            let mut zg: Vec<&mut Tensor> = Vec::new();
            let mut sg: Vec<&mut Tensor> = Vec::new();
            for ((t, v), &s) in model.params.tensors_mut().iter_mut().zip(vars).zip(&is_s) {
                t.zero_grad();
                grads.write_into(v, t)?;
                if s {
                    sg.push(t);
                } else {
                    zg.push(t);
                }
            }
            adam_step(&mut zg, &mut adam_z)?;
            if !sg.is_empty() {
                adam_step(&mut sg, &mut adam_s)?;
            }
            run.add(&br, chunk.len() as f64);
        }
        let m = run.mean();
        model.epoch = epoch + 1;
        log.push(EpochLog {
            epoch: epoch + 1,
            loss_total: m.total,
            loss_recon: m.recon,
            loss_ortho: m.ortho,
            loss_prior: m.prior,
            jsd_pos_mean: m.jsd_pos_mean,
            jsd_neg_mean: m.jsd_neg_mean,
            lr_z: adam_z.lr,
            lr_s: adam_s.lr,
        });
        let val = if dev.is_empty() { m.total } else { evaluate_loss(&model, dev, dev_mask_seed)?.total };
        val_losses.push(val);
        log::info!("epoch {} loss {:.5} val {:.5} jsd+ {:.4} jsd- {:.4}", epoch + 1, m.total, val, m.jsd_pos_mean, m.jsd_neg_mean);
        if !val.is_finite() {
            model.params = last_good;
            stop = StopReason::NonFinite;
            break;
        }
        last_good = model.params.clone();
        if stopper.update(epoch + 1, val) {
            stop = StopReason::EarlyStopped;
            break;
        }
    }
    for t in model.params.tensors_mut() {
        t.zero_grad();
    }
    Ok(TrainOutcome { model, log, val_losses, stop })
}

/// Feature extraction, normalisation fit and training from raw signals.
pub fn train_from_signals(
    encoder: EncoderConfig,
    training: TrainingConfig,
    decomposition: DecompositionConfig,
    train: &[Signal],
    dev: &[Signal],
) -> Result<TrainOutcome> {
    let sr = train
        .first()
        .map(Signal::sample_rate)
        .ok_or_else(|| Error::EmptyDataset("training split has no sequences".into()))?;
    let pipeline = FeaturePipeline::new(&encoder, &training, &decomposition, sr)?;
    let prep = |s: &[Signal]| -> Vec<Signal> {
        super::features::prepare_sequences(s, training.d_min, training.d_max).into_iter().map(|p| p.signal).collect()
    };
    let train_f = pipeline.extract_all(&prep(train))?;
    let dev_f = pipeline.extract_all(&prep(dev))?;
    let norm = FeatureNorm::fit(&train_f)?;
    let model = DecVae::new(encoder, training, decomposition, norm, sr)?;
    train_decvae(model, &train_f, &dev_f)
}
