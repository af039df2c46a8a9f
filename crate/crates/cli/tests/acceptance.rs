//! End-to-end acceptance checks. Each test prints one `criterion N: PASS|FAIL` line.
//!
//! The model-training criteria run at a reduced desk scale; sizes are the
//! constants below.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use decvae::autodiff::{finite_difference_check, Tape, Tensor, Var};
use decvae::dsp::spectrum::hann_magnitude;
use decvae::dsp::{decompose, frame_sequence, DecompositionConfig, Signal};
use decvae::metrics::{
    dci_scores, irs_score, mi_matrix, modularity_explicitness, task_eval_cv, ClassifierKind, CvConfig, DciConfig,
    FactorTable, Matrix, MetricReport,
};
use decvae::model::features::MaskSpec;
use decvae::model::loss::{gaussian_kl, loss_ortho, loss_prior, loss_recon};
use decvae::model::network::Bound;
use decvae::model::objective::batch_objective;
use decvae::model::train::{train_from_signals, EpochLog};
use decvae::model::{init_params, Aggregation, ConvSpec, DecVae, EncoderConfig, ParamStore, TrainingConfig};
use decvae::simvowels::{generate_in_memory, synth_vowel_segment, DatasetConfig, SpeakerSpec, Split, Vowel};
use decvae_cli::pipeline::{embed_utterances, Labelled, Utterance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const SR: u32 = 16_000;

// training-based criteria
const MAIN_TRAIN: usize = 120;
const MAIN_EPOCHS: usize = 15;
const ABLATION_TRAIN: usize = 60;
const ABLATION_EPOCHS: usize = 12;
const ABLATION_EVAL_UTTS: usize = 120;
const LEARNING_RATE: f64 = 1e-3;
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

// Written to the raw stderr handle so the line survives libtest output capture.
fn report(id: &str, pass: bool, detail: String) {
    let line = format!("criterion {id}: {} ({detail})\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {id} failed: {detail}");
}

// ---------------------------------------------------------------- 1

fn random(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

fn weighted_sum(t: &mut Tape, y: Var) -> decvae::Result<Var> {
    let shape = t.shape(y).to_vec();
    let n: usize = shape.iter().product();
    let w = t.constant(shape, (0..n).map(|i| (1.3 * i as f64 + 0.7).sin() + 1.5).collect())?;
    let p = t.mul(y, w)?;
    Ok(t.sum(p))
}

type Op = Box<dyn Fn(&mut Tape, Var) -> decvae::Result<Var>>;

fn op(f: impl Fn(&mut Tape, Var) -> decvae::Result<Var> + 'static) -> Op {
    Box::new(f)
}

fn primitive_cases(rng: &mut ChaCha8Rng) -> Vec<(&'static str, Tensor, Op)> {
    let x = random(rng, &[3, 4], -2.0, 2.0);
    let pos = random(rng, &[3, 4], 0.5, 2.0);
    let x3 = random(rng, &[2, 3, 4], -1.0, 1.0);
    let w = random(rng, &[4, 5], -1.0, 1.0);
    let b = random(rng, &[5], -1.0, 1.0);
    let cw = random(rng, &[3, 4, 2], -1.0, 1.0);
    let cx = random(rng, &[2, 6, 4], -1.0, 1.0);
    let g = random(rng, &[4], 0.5, 1.5);
    let beta = random(rng, &[4], -0.5, 0.5);
    let (p1, p2, p3, p4, x31) = (pos.clone(), pos.clone(), pos.clone(), pos.clone(), x3.clone());
    let (xw, xc, xl, gl, bl) = (x.clone(), cx.clone(), x.clone(), g.clone(), beta.clone());
    let (xl2, w1, cw1) = (x.clone(), w.clone(), cw.clone());
    vec![
        ("add", x.clone(), op(move |t, v| { let c = t.leaf(&p1); t.add(v, c) })),
        ("sub", x.clone(), op(move |t, v| { let c = t.leaf(&p2); t.sub(c, v) })),
        ("mul", x.clone(), op(move |t, v| { let c = t.leaf(&p3); t.mul(v, c) })),
        ("div", pos.clone(), op(move |t, v| { let c = t.leaf(&p4); t.div(c, v) })),
        ("add_scalar", x.clone(), op(|t, v| Ok(t.add_scalar(v, 2.0)))),
        ("scale", x.clone(), op(|t, v| Ok(t.scale(v, -0.7)))),
        ("neg", x.clone(), op(|t, v| Ok(t.neg(v)))),
        ("exp", x.clone(), op(|t, v| Ok(t.exp(v)))),
        ("log", pos.clone(), op(|t, v| Ok(t.log(v)))),
        ("gelu", x.clone(), op(|t, v| Ok(t.gelu(v)))),
        ("clamp", x.clone(), op(|t, v| Ok(t.clamp(v, -5.0, 5.0)))),
        ("softmax", x.clone(), op(|t, v| Ok(t.softmax(v)))),
        ("log_softmax", x.clone(), op(|t, v| Ok(t.log_softmax(v)))),
        ("sum", x3.clone(), op(|t, v| Ok(t.sum(v)))),
        ("mean", x3.clone(), op(|t, v| Ok(t.mean(v)))),
        ("sum_last", x3.clone(), op(|t, v| Ok(t.sum_last(v)))),
        ("mean_pool", x3.clone(), op(|t, v| t.mean_pool(v))),
        ("reshape", x3.clone(), op(|t, v| t.reshape(v, vec![6, 4]))),
        ("gather_rows", x3.clone(), op(|t, v| t.gather_rows(v, &[1, 0, 1]))),
        ("slice_rows", x3.clone(), op(|t, v| t.slice_rows(v, 1, 1))),
        ("concat", x3, op(move |t, v| { let c = t.leaf(&x31); t.concat(&[c, v], 2) })),
        ("linear", x.clone(), op(move |t, v| { let (wv, bv) = (t.leaf(&w1), t.leaf(&b)); t.linear(v, wv, Some(bv)) })),
        ("linear (weight)", w, op(move |t, v| { let xv = t.leaf(&xw); t.linear(xv, v, None) })),
        ("conv1d (kernel)", cw, op(move |t, v| { let xv = t.leaf(&xc); t.conv1d(xv, v, None, 2, 0) })),
        ("layer_norm (gain)", g.clone(), op(move |t, v| { let (xv, bv) = (t.leaf(&xl), t.leaf(&bl)); t.layer_norm(xv, v, bv) })),
        ("layer_norm (shift)", beta.clone(), op(move |t, v| { let (xv, gv) = (t.leaf(&x), t.leaf(&gl)); t.layer_norm(xv, gv, v) })),
        ("conv1d", cx, op(move |t, v| { let wv = t.leaf(&cw1); t.conv1d(v, wv, None, 1, 1) })),
        ("layer_norm", xl2, op(move |t, v| { let (gv, bv) = (t.leaf(&g), t.leaf(&beta)); t.layer_norm(v, gv, bv) })),
    ]
}

fn split_views(t: &mut Tape, x: Var, views: usize, rows: usize) -> Vec<Var> {
    (0..views).map(|v| t.slice_rows(x, v * rows, rows).unwrap()).collect()
}

fn tiny_encoder(dual: bool) -> EncoderConfig {
    EncoderConfig {
        conv_layers: vec![ConvSpec { channels: 5, kernel: 3, stride: 1 }, ConvSpec { channels: 4, kernel: 3, stride: 2 }],
        v: 6,
        d: 7,
        z_dim: 3,
        components: 3,
        n_mels: 5,
        aggregation: Aggregation::ConcatAll,
        dual,
    }
}

fn objective(store: &ParamStore, enc: &EncoderConfig, x: &Tensor, valid: &[usize], mask: &MaskSpec) -> f64 {
    let mut tape = Tape::new();
    let p = Bound::new(&mut tape, store);
    let vars = batch_objective(&mut tape, &p, enc, &TrainingConfig::default(), x, valid, mask).unwrap();
    tape.scalar(vars.total)
}

/// Relative error of the whole objective's parameter gradient on sampled coordinates.
fn objective_error(seed: u64) -> f64 {
    let enc = tiny_encoder(seed % 2 == 0);
    let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
    let x = random(&mut rng, &[enc.views() * 2 * 3, 6, enc.n_mels], -1.0, 1.0);
    let valid = vec![3, 2];
    let mask = MaskSpec { selected: vec![vec![0, 2], vec![1]] };
    let mut store = init_params(&enc, seed).unwrap();
    let mut tape = Tape::new();
    let p = Bound::new(&mut tape, &store);
    let total = batch_objective(&mut tape, &p, &enc, &TrainingConfig::default(), &x, &valid, &mask).unwrap().total;
    let grads = tape.backward(total).unwrap();
    let analytic: Vec<Vec<f64>> = p
        .vars()
        .iter()
        .zip(store.tensors())
        .map(|(&v, t)| grads.get(v).map_or(vec![0.0; t.numel()], <[f64]>::to_vec))
        .collect();
    let h = 1e-5;
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for ti in 0..store.len() {
        let n = store.tensors()[ti].numel();
        for _ in 0..4.min(n) {
            let k = rng.random_range(0..n);
            let orig = store.tensors()[ti].data()[k];
            store.tensors_mut()[ti].data_mut()[k] = orig + h;
            let up = objective(&store, &enc, &x, &valid, &mask);
            store.tensors_mut()[ti].data_mut()[k] = orig - h;
            let down = objective(&store, &enc, &x, &valid, &mask);
            store.tensors_mut()[ti].data_mut()[k] = orig;
            diff = diff.max(((up - down) / (2.0 * h) - analytic[ti][k]).abs());
            scale = scale.max(analytic[ti][k].abs());
        }
    }
    diff / scale.max(1e-8)
}

#[test]
fn criterion_1_gradient_checks() {
    let start = Instant::now();
    let mut worst = ("", 0.0f64);
    let mut note = |name: &'static str, err: f64| {
        if err > worst.1 {
            worst = (name, err);
        }
    };
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, x, op) in primitive_cases(&mut rng) {
            let err = finite_difference_check(|t, v| {
                let y = op(t, v)?;
                weighted_sum(t, y)
            }, &x, 1e-5)
            .unwrap();
            note(name, err);
        }
        let x = random(&mut rng, &[4 * 5, 6], -1.5, 1.5);
        let w: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..2.0)).collect();
        let e = finite_difference_check(|t, v| {
            let views = split_views(t, v, 4, 5);
            Ok(loss_recon(t, &views, &w, 1e-4)?.loss)
        }, &x, 1e-5)
        .unwrap();
        note("recon", e);
        let e = finite_difference_check(|t, v| {
            let views = split_views(t, v, 4, 5);
            Ok(loss_ortho(t, &views, &w, 1e-4)?.loss)
        }, &x, 1e-5)
        .unwrap();
        note("ortho", e);
        let x = random(&mut rng, &[24, 5], -2.0, 2.0);
        let e = finite_difference_check(|t, v| {
            let parts = split_views(t, v, 6, 4);
            loss_prior(t, &parts[..3], &parts[3..])
        }, &x, 1e-5)
        .unwrap();
        note("prior", e);
        note("objective", objective_error(seed));
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        "1",
        worst.1 <= 1e-4 && secs < 60.0,
        format!("worst relative error {:.2e} in {}, {secs:.1} s", worst.1, worst.0),
    );
}

// ---------------------------------------------------------------- 2

fn tones(parts: &[(f64, f64)], n: usize) -> Signal {
    let x = (0..n)
        .map(|i| parts.iter().map(|&(f, a)| a * (2.0 * PI * f * i as f64 / SR as f64).sin()).sum())
        .collect();
    Signal::new(x, SR).unwrap()
}

/// Share of energy in `[lo, hi)` Hz by direct DFT.
fn band_share(x: &Signal, lo: f64, hi: f64) -> f64 {
    let n = x.len();
    let (mut inside, mut total) = (0.0, 0.0);
    for k in 0..=n / 2 {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, &v) in x.samples().iter().enumerate() {
            let a = -2.0 * PI * (k * i) as f64 / n as f64;
            re += v * a.cos();
            im += v * a.sin();
        }
        let f = k as f64 * SR as f64 / n as f64;
        total += re * re + im * im;
        if f >= lo && f < hi {
            inside += re * re + im * im;
        }
    }
    inside / total
}

fn centroid(s: &Signal) -> f64 {
    let spec = hann_magnitude(s).unwrap();
    let hz = spec.bin_hz();
    let p: Vec<f64> = spec.magnitude().iter().map(|m| m * m).collect();
    p.iter().enumerate().map(|(k, v)| k as f64 * hz * v).sum::<f64>() / p.iter().sum::<f64>()
}

#[test]
fn criterion_2_decomposition() {
    let mut worst_rec = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(64..2048);
        let c = rng.random_range(2..6);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cs = decompose(&Signal::new(x.clone(), SR).unwrap(), &DecompositionConfig::ewt(c)).unwrap();
        let mut sum = vec![0.0; n];
        for comp in &cs.components {
            sum.iter_mut().zip(comp.samples()).for_each(|(s, v)| *s += v);
        }
        let num: f64 = x.iter().zip(&sum).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = x.iter().map(|a| a * a).sum();
        worst_rec = worst_rec.max((num / den).sqrt());
    }

    let fd2 = DecompositionConfig { components: 2, ..DecompositionConfig::default() };
    let cs = decompose(&tones(&[(200.0, 1.0), (2000.0, 1.0)], 3200), &fd2).unwrap();
    let sep = band_share(&cs.components[0], 100.0, 300.0).min(band_share(&cs.components[1], 1900.0, 2100.0));

    let speaker = SpeakerSpec { id: 0, vocal_tract_factor: 1.0, f0: 120.0 };
    let seg = synth_vowel_segment(&speaker, &Vowel::A.spec(), 1.0, 0).unwrap();
    let frame = &frame_sequence(&seg, 200.0, 200.0).unwrap()[2];
    let cs = decompose(frame, &DecompositionConfig::default()).unwrap();
    let dev = cs
        .components
        .iter()
        .zip(Vowel::A.centres())
        .map(|(c, want)| (centroid(c) - want).abs() / want)
        .fold(0.0f64, f64::max);

    report(
        "2",
        worst_rec <= 1e-6 && sep >= 0.9 && dev <= 0.15,
        format!("EWT worst rel L2 {worst_rec:.1e}; FD two-tone band share {sep:.3}; /a/ centroid max deviation {:.1}%", dev * 100.0),
    );
}

// ---------------------------------------------------------------- 3

#[test]
fn criterion_3_prior_term() {
    let zero = gaussian_kl(&[0.0; 16], &[0.0; 16]);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mu: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lv: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            for (m, l) in mu.iter().zip(&lv) {
                let e: f64 = StandardNormal.sample(&mut rng);
                let z = m + (0.5 * l).exp() * e;
                acc += -0.5 * l - 0.5 * e * e + 0.5 * z * z;
            }
        }
        let kl = gaussian_kl(&mu, &lv);
        worst = worst.max((kl - acc / n as f64).abs() / kl);
    }
    report("3", worst <= 0.01 && zero == 0.0, format!("worst MC relative gap {:.3}%, KL(0,0) = {zero}", worst * 100.0));
}

// ---------------------------------------------------------------- 4

fn crossed_factors(reps: usize) -> FactorTable {
    let (mut v, mut s) = (Vec::new(), Vec::new());
    for r in 0..reps {
        for a in 0..5 {
            for b in 0..6 {
                v.push(a);
                s.push((b + r) % 6);
            }
        }
    }
    FactorTable::from_codes(vec!["vowel".into(), "speaker".into()], vec![v, s]).unwrap()
}

fn noise(n: usize, d: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
    Matrix::from_rows(&rows).unwrap()
}

/// Histogram entropy with explicit edge comparison.
fn entropy_oracle(x: &[f64], bins: usize) -> f64 {
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let edges: Vec<f64> = (0..=bins).map(|b| lo + (hi - lo) * b as f64 / bins as f64).collect();
    let mut counts = vec![0.0; bins];
    for &v in x {
        counts[(0..bins).rev().find(|&b| v >= edges[b]).unwrap()] += 1.0;
    }
    let n = x.len() as f64;
    counts.iter().filter(|&&c| c > 0.0).map(|c| -(c / n) * (c / n).ln()).sum()
}

#[test]
fn criterion_4_metric_oracles() {
    let f = crossed_factors(20);
    let rows: Vec<Vec<f64>> = (0..f.len()).map(|i| vec![f.codes[0][i] as f64, f.codes[1][i] as f64]).collect();
    let ident = Matrix::from_rows(&rows).unwrap();
    let dci = dci_scores(&ident, &f, &DciConfig::default()).unwrap();
    let quick = CvConfig { folds: 5, seeds: vec![0, 1] };
    let noisy = dci_scores(&noise(f.len(), 4, 7), &f, &DciConfig { cv: quick.clone(), ..DciConfig::default() }).unwrap();
    let chance = (1.0 / 5.0 + 1.0 / 6.0) / 2.0;
    let irs = irs_score(&ident, &f).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dup: Vec<Vec<f64>> = (0..5000)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            vec![a, a, rng.random::<f64>()]
        })
        .collect();
    let dup = Matrix::from_rows(&dup).unwrap();
    let mi = mi_matrix(&dup, 30).unwrap();
    let mi_gap = (mi.values[0][1] - entropy_oracle(&dup.column(0), 30)).abs();

    let mut ranges_ok = true;
    for z in [&ident, &noise(f.len(), 4, 8), &dup.select_rows(&(0..f.len()).collect::<Vec<_>>())] {
        let r = MetricReport {
            dci: Some(dci_scores(z, &f, &DciConfig { cv: quick.clone(), ..DciConfig::default() }).unwrap()),
            modexp: Some(modularity_explicitness(z, &f, &quick).unwrap()),
            irs: Some(irs_score(z, &f).unwrap()),
            mi: Some(mi_matrix(z, 30).unwrap()),
            ..MetricReport::default()
        };
        ranges_ok &= r.validate_ranges().is_ok();
    }

    let pass = dci.disentanglement.mean >= 0.95
        && dci.completeness.mean >= 0.95
        && dci.informativeness.mean >= 0.99
        && (noisy.informativeness.mean - chance).abs() <= 0.05
        && irs.score >= 0.99
        && mi_gap <= 1e-6
        && ranges_ok;
    report(
        "4",
        pass,
        format!(
            "identity D {:.3} C {:.3} I {:.3}; noise I {:.3} vs chance {chance:.3}; IRS {:.3}; MI gap {mi_gap:.1e}; ranges ok {ranges_ok}",
            dci.disentanglement.mean, dci.completeness.mean, dci.informativeness.mean, noisy.informativeness.mean, irs.score
        ),
    );
}

// ---------------------------------------------------------------- 5-7

struct Data {
    train: Vec<Utterance>,
    dev: Vec<Utterance>,
    test: Vec<Utterance>,
}

fn data() -> &'static Data {
    static DATA: OnceLock<Data> = OnceLock::new();
    DATA.get_or_init(|| {
        // 60 speakers; the 300 test utterances give every speaker 5 sequences
        let cfg = DatasetConfig { n_utterances: 600, n_speakers: 60, seed: 7, split_weights: [4, 1, 5] };
        let (mut train, mut dev, mut test) = (Vec::new(), Vec::new(), Vec::new());
        for (rec, split) in generate_in_memory(&cfg).unwrap() {
            match split {
                Split::Train => train.push(rec.into()),
                Split::Dev => dev.push(rec.into()),
                Split::Test => test.push(rec.into()),
            }
        }
        Data { train, dev, test }
    })
}

fn signals(u: &[Utterance]) -> Vec<Signal> {
    u.iter().map(|x| x.signal.clone()).collect()
}

fn train(n: usize, epochs: usize, seed: u64, beta: f64, full: bool) -> (DecVae, Vec<EpochLog>) {
    let d = data();
    let tc = TrainingConfig {
        beta,
        lr_z: LEARNING_RATE,
        lr_s: LEARNING_RATE,
        warmup_epochs: 2,
        t_max: epochs,
        decompose: full,
        contrastive: full,
        seed,
        ..TrainingConfig::default()
    };
    let dev = &d.dev[..d.dev.len().min(30)];
    let out = train_from_signals(EncoderConfig::desk(), tc, DecompositionConfig::default(), &signals(&d.train[..n]), &signals(dev))
        .unwrap();
    (out.model, out.log)
}

fn every_other(l: &Labelled) -> (Matrix, FactorTable) {
    let idx: Vec<usize> = (0..l.frames.len()).step_by(2).collect();
    (l.frames.to_matrix().select_rows(&idx), l.frame_factors.subset(&idx).unwrap())
}

struct Main {
    decvae: Labelled,
    ablation: Labelled,
    log: Vec<EpochLog>,
}

fn main_experiment() -> &'static Main {
    static MAIN: OnceLock<Main> = OnceLock::new();
    MAIN.get_or_init(|| {
        let test = &data().test;
        let (m, log) = train(MAIN_TRAIN, MAIN_EPOCHS, 0, 0.1, true);
        let (a, _) = train(MAIN_TRAIN, MAIN_EPOCHS, 0, 0.1, false);
        Main { decvae: embed_utterances(&m, test).unwrap(), ablation: embed_utterances(&a, test).unwrap(), log }
    })
}

fn vowel_accuracy(l: &Labelled) -> f64 {
    let (z, f) = every_other(l);
    let cv = CvConfig { folds: 5, seeds: vec![0] };
    task_eval_cv(&z, &f.codes[0], "vowel", ClassifierKind::Logistic, &cv).unwrap().accuracy.mean
}

#[test]
fn criterion_5a_vowel_accuracy_over_ablation() {
    let m = main_experiment();
    let (d, a) = (vowel_accuracy(&m.decvae), vowel_accuracy(&m.ablation));
    let gain = 100.0 * (d - a);
    report("5a", gain >= 5.0, format!("DecVAE {:.1}% vs ablation {:.1}%, +{gain:.1} points", 100.0 * d, 100.0 * a));
}

#[test]
fn criterion_5b_sequence_speaker_accuracy() {
    let m = main_experiment();
    let s = &m.decvae;
    let cv = CvConfig { folds: 5, seeds: vec![0] };
    let r = task_eval_cv(&s.sequences.to_matrix(), &s.sequence_factors.codes[0], "speaker", ClassifierKind::Logistic, &cv)
        .unwrap();
    let chance = 1.0 / 60.0;
    report(
        "5b",
        r.accuracy.mean >= 10.0 * chance,
        format!("accuracy {:.1}% = {:.1}x chance", 100.0 * r.accuracy.mean, r.accuracy.mean / chance),
    );
}

#[test]
fn criterion_5c_divergence_targets() {
    let last = main_experiment().log.last().unwrap();
    report(
        "5c",
        last.jsd_pos_mean <= 0.2 && last.jsd_neg_mean >= 0.6,
        format!("epoch {} positive-pair JSD {:.3}, negative-pair JSD {:.3}", last.epoch, last.jsd_pos_mean, last.jsd_neg_mean),
    );
}

struct Ablations {
    low_beta: Vec<DecVae>,
    high_beta: Vec<DecVae>,
}

fn ablations() -> &'static Ablations {
    static AB: OnceLock<Ablations> = OnceLock::new();
    AB.get_or_init(|| Ablations {
        low_beta: SEEDS.iter().map(|&s| train(ABLATION_TRAIN, ABLATION_EPOCHS, s, 0.1, true).0).collect(),
        high_beta: SEEDS.iter().map(|&s| train(ABLATION_TRAIN, ABLATION_EPOCHS, s, 10.0, true).0).collect(),
    })
}

fn dci_of(model: &DecVae, aggregation: Aggregation) -> (f64, f64) {
    let mut m = model.clone();
    m.encoder.aggregation = aggregation;
    let l = embed_utterances(&m, &data().test[..ABLATION_EVAL_UTTS]).unwrap();
    let (z, f) = every_other(&l);
    let r = dci_scores(&z, &f, &DciConfig { cv: CvConfig { folds: 5, seeds: vec![0] }, ..DciConfig::default() }).unwrap();
    (r.disentanglement.mean, r.informativeness.mean)
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

#[test]
fn criterion_6_beta_direction() {
    let ab = ablations();
    let low: Vec<f64> = ab.low_beta.iter().map(|m| dci_of(m, Aggregation::ConcatAll).0).collect();
    let high: Vec<f64> = ab.high_beta.iter().map(|m| dci_of(m, Aggregation::ConcatAll).0).collect();
    let ((ml, sl), (mh, sh)) = (mean_sd(&low), mean_sd(&high));
    // two-sample standard error of the difference of means
    let margin = 1.96 * (sl * sl / low.len() as f64 + sh * sh / high.len() as f64).sqrt();
    report(
        "6",
        mh <= ml + margin,
        format!("DCI D beta=10 {mh:.3} vs beta=0.1 {ml:.3}, noise margin {margin:.3}"),
    );
}

#[test]
fn criterion_7_aggregation_direction() {
    let ab = ablations();
    let all: Vec<f64> = ab.low_beta.iter().map(|m| dci_of(m, Aggregation::ConcatAll).1).collect();
    let single: Vec<f64> = ab.low_beta.iter().map(|m| dci_of(m, Aggregation::SingleSubspace(0)).1).collect();
    let (a, s) = (mean_sd(&all).0, mean_sd(&single).0);
    report("7", a >= s, format!("DCI I concat_all {a:.3} vs single_subspace(0) {s:.3}"));
}

// ---------------------------------------------------------------- 8

fn run(dir: &Path, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_decvae"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn pipeline(dir: &Path, out: &str) {
    let o = |s: &str| format!("{out}/{s}");
    run(dir, &["--seed", "3", "--out", &o("data"), "gen-data", "--n", "24", "--speakers", "4"]);
    run(dir, &["--seed", "3", "--out", &o("model"), "train", "--data", &o("data"), "--epochs", "2", "--max-train", "8", "--max-dev", "2"]);
    let ckpt = o("model/model.ckpt");
    run(dir, &["--seed", "3", "--out", &o("emb"), "embed", "--checkpoint", &ckpt, "--data", &o("data"), "--split", "train"]);
    let (z, f) = (o("emb/frames.csv"), o("emb/frame_factors.csv"));
    run(dir, &["--seed", "3", "--out", &o("eval"), "eval", "--embeddings", &z, "--factors", &f, "--folds", "3", "--cv-seeds", "0"]);
}

#[test]
fn criterion_8_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    pipeline(tmp.path(), "a");
    pipeline(tmp.path(), "b");
    let files = ["emb/frames.csv", "emb/sequences.csv", "emb/frame_factors.csv", "eval/metrics.json", "model/model.ckpt"];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| fs::read(tmp.path().join("a").join(f)).unwrap() != fs::read(tmp.path().join("b").join(f)).unwrap())
        .collect();
    report("8", differing.is_empty(), format!("{} artifacts compared, differing: {differing:?}", files.len()));
}
