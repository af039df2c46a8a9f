use decvae::metrics::classifiers::ClassifierKind;
use decvae::metrics::traversal::DimRole;
use decvae::metrics::{
    dci_from_importance, dci_scores, gcn_score, irs_score, latent_traversal_response, mi_matrix,
    modularity_explicitness, task_eval_cv, CvConfig, DciConfig, FactorTable, Matrix, MetricReport,
};
use decvae::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Two factors (5 vowels, 6 speakers) fully crossed, `reps` times.
fn factors(reps: usize) -> FactorTable {
    let mut v = Vec::new();
    let mut s = Vec::new();
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

fn identity_code(f: &FactorTable) -> Matrix {
    let rows: Vec<Vec<f64>> = (0..f.len()).map(|i| vec![f.codes[0][i] as f64, f.codes[1][i] as f64]).collect();
    Matrix::from_rows(&rows).unwrap()
}

fn noise_code(n: usize, d: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
    Matrix::from_rows(&rows).unwrap()
}

fn quick_cv() -> CvConfig {
    CvConfig { folds: 5, seeds: vec![0, 1] }
}

/// Histogram entropy written independently of the library: bins by explicit
/// edge comparison.
fn oracle_entropy(x: &[f64], bins: usize) -> f64 {
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let edges: Vec<f64> = (0..=bins).map(|b| lo + (hi - lo) * b as f64 / bins as f64).collect();
    let mut counts = vec![0.0; bins];
    for &v in x {
        let b = (0..bins).rev().find(|&b| v >= edges[b]).unwrap();
        counts[b] += 1.0;
    }
    let n = x.len() as f64;
    counts.iter().filter(|&&c| c > 0.0).map(|c| -(c / n) * (c / n).ln()).sum()
}

#[test]
fn duplicated_dimension_mi_equals_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rows: Vec<Vec<f64>> = (0..5000)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            vec![a, a, rng.random::<f64>()]
        })
        .collect();
    let z = Matrix::from_rows(&rows).unwrap();
    let m = mi_matrix(&z, 30).unwrap();
    let h = oracle_entropy(&z.column(0), 30);
    assert!((m.values[0][1] - h).abs() < 1e-6, "{} vs {h}", m.values[0][1]);
    assert!((m.values[0][0] - h).abs() < 1e-6);
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(m.values[i][j], m.values[j][i]);
            assert!(m.values[i][j] >= 0.0);
        }
    }
}

#[test]
fn independent_uniforms_have_small_mi() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rows: Vec<Vec<f64>> = (0..100_000).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
    let m = mi_matrix(&Matrix::from_rows(&rows).unwrap(), 30).unwrap();
    assert!(m.mean_off_diagonal <= 0.01, "{}", m.mean_off_diagonal);
}

fn correlated_pair(n: usize, rho: f64, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            vec![a, rho * a + (1.0 - rho * rho).sqrt() * b]
        })
        .collect();
    Matrix::from_rows(&rows).unwrap()
}

#[test]
fn gcn_closed_form() {
    let z = correlated_pair(200_000, 0.5, 3);
    let g = gcn_score(&z).unwrap();
    let oracle = -0.5 * (1.0f64 - 0.25).ln();
    assert!((g.total_correlation - oracle).abs() < 0.005, "{}", g.total_correlation);
    assert!(!g.ridge_applied);

    let diag = noise_code(50_000, 4, 4);
    let g = gcn_score(&diag).unwrap();
    assert!(g.total_correlation < 1e-3, "{}", g.total_correlation);
    assert!(g.gcn >= 0.0);
}

#[test]
fn gcn_ridge_on_duplicated_dimension() {
    let base = noise_code(500, 2, 5);
    let rows: Vec<Vec<f64>> = (0..base.rows).map(|i| vec![base.get(i, 0), base.get(i, 0), base.get(i, 1)]).collect();
    let g = gcn_score(&Matrix::from_rows(&rows).unwrap()).unwrap();
    assert!(g.ridge_applied);
    assert!(g.total_correlation.is_finite() && g.total_correlation > 3.0);
    assert!(gcn_score(&noise_code(3, 3, 0)).is_err());
}

#[test]
fn mi_and_gcn_are_permutation_invariant() {
    let z = correlated_pair(3000, 0.7, 6);
    let rows: Vec<Vec<f64>> = (0..z.rows).map(|i| vec![z.get(i, 1), z.get(i, 0)]).collect();
    let p = Matrix::from_rows(&rows).unwrap();
    let (a, b) = (mi_matrix(&z, 30).unwrap(), mi_matrix(&p, 30).unwrap());
    assert!((a.mean_off_diagonal - b.mean_off_diagonal).abs() < 1e-12);
    assert!((a.values[0][0] - b.values[1][1]).abs() < 1e-12);
    let (a, b) = (gcn_score(&z).unwrap(), gcn_score(&p).unwrap());
    assert!((a.gcn - b.gcn).abs() < 1e-12);
}

#[test]
fn dci_identity_code_is_perfect() {
    let f = factors(20);
    let r = dci_scores(&identity_code(&f), &f, &DciConfig::default()).unwrap();
    assert!(r.disentanglement.mean >= 0.95, "D {:?}", r.disentanglement);
    assert!(r.completeness.mean >= 0.95, "C {:?}", r.completeness);
    assert!(r.informativeness.mean >= 0.99, "I {:?}", r.informativeness);
}

#[test]
fn dci_noise_code_is_at_chance() {
    let f = factors(20);
    let cfg = DciConfig { cv: quick_cv(), ..DciConfig::default() };
    let r = dci_scores(&noise_code(f.len(), 4, 7), &f, &cfg).unwrap();
    let chance = (1.0 / 5.0 + 1.0 / 6.0) / 2.0;
    assert!((r.informativeness.mean - chance).abs() <= 0.05, "{:?}", r.informativeness);
}

#[test]
fn dci_entropy_formula_for_split_factors() {
    // each of 2 factors spread equally over 2 private dims out of 4
    let r = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]];
    let (d, c) = dci_from_importance(&r);
    assert!((d - 1.0).abs() < 1e-12);
    assert!((c - (1.0 - 2f64.ln() / 4f64.ln())).abs() < 1e-12);
}

#[test]
fn dci_informativeness_is_affine_invariant() {
    let f = factors(10);
    let z = identity_code(&f);
    let mut noisy = noise_code(f.len(), 3, 8);
    for i in 0..noisy.rows {
        noisy.data[i * 3] += z.get(i, 0);
    }
    let mut scaled = noisy.clone();
    for r in scaled.data.chunks_mut(3) {
        r[0] = 7.0 * r[0] - 3.0;
        r[1] = -0.2 * r[1] + 11.0;
        r[2] *= 1e3;
    }
    let cfg = DciConfig { cv: quick_cv(), ..DciConfig::default() };
    let a = dci_scores(&noisy, &f, &cfg).unwrap();
    let b = dci_scores(&scaled, &f, &cfg).unwrap();
    assert!((a.informativeness.mean - b.informativeness.mean).abs() < 1e-9);
}

#[test]
fn modularity_and_explicitness_oracles() {
    let f = factors(20);
    let cv = quick_cv();
    let ident = modularity_explicitness(&identity_code(&f), &f, &cv).unwrap();
    assert!(ident.modularity > 0.99, "{}", ident.modularity);
    assert!(ident.explicitness.mean > 0.95, "{:?}", ident.explicitness);
    let noise = modularity_explicitness(&noise_code(f.len(), 2, 9), &f, &cv).unwrap();
    assert!(ident.modularity >= noise.modularity);
    assert!(ident.explicitness.mean >= noise.explicitness.mean);
    for r in [&ident, &noise] {
        assert!((0.0..=1.0).contains(&r.modularity));
        assert!((0.0..=1.0).contains(&r.explicitness.mean));
    }
}

#[test]
fn irs_oracles() {
    let f = factors(10);
    let inv = irs_score(&identity_code(&f), &f).unwrap();
    assert!(inv.score >= 0.99, "{}", inv.score);
    // every dimension tracks speaker only: robust to speaker, not to vowel
    let rows: Vec<Vec<f64>> = (0..f.len()).map(|i| vec![f.codes[1][i] as f64 - 2.5]).collect();
    let adv = irs_score(&Matrix::from_rows(&rows).unwrap(), &f).unwrap();
    let vowel = adv.factors.iter().position(|n| n == "vowel").unwrap();
    assert!(adv.per_factor[vowel] < 0.05, "{}", adv.per_factor[vowel]);
    let constant = irs_score(&Matrix::from_rows(&vec![vec![1.0, 2.0]; f.len()]).unwrap(), &f).unwrap();
    assert_eq!(constant.score, 1.0);
    assert!(constant.uninformative);
    let noise = irs_score(&noise_code(f.len(), 2, 10), &f).unwrap();
    assert!(inv.score >= noise.score);
    assert!((0.0..=1.0).contains(&noise.score));
}

#[test]
fn task_eval_oracles() {
    let cv = quick_cv();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x: Vec<f64> = (0..500).map(|_| rng.random_range(0.0..5.0)).collect();
    let labels: Vec<usize> = x.iter().map(|v| *v as usize).collect();
    let rows: Vec<Vec<f64>> = x.iter().map(|&v| vec![v, rng.random()]).collect();
    let z = Matrix::from_rows(&rows).unwrap();
    for kind in [ClassifierKind::Logistic, ClassifierKind::RandomForest] {
        let r = task_eval_cv(&z, &labels, "v", kind, &cv).unwrap();
        assert!(r.accuracy.mean >= 0.97, "{kind:?}: {:?}", r.accuracy);
        assert!(r.accuracy.ci_low <= r.accuracy.mean && r.accuracy.mean <= r.accuracy.ci_high);
    }
    // one-vs-rest linear scores are monotone in a single dim, so the SVM
    // gets a threshold labelling
    let halves: Vec<usize> = x.iter().map(|&v| usize::from(v > 2.5)).collect();
    let r = task_eval_cv(&z, &halves, "h", ClassifierKind::Svm, &cv).unwrap();
    assert!(r.accuracy.mean >= 0.97, "{:?}", r.accuracy);

    let rows: Vec<Vec<f64>> = labels.iter().map(|&l| vec![l as f64]).collect();
    let r = task_eval_cv(&Matrix::from_rows(&rows).unwrap(), &labels, "v", ClassifierKind::Logistic, &cv).unwrap();
    assert!(r.accuracy.mean >= 0.99, "{:?}", r.accuracy);

    let balanced: Vec<usize> = (0..500).map(|i| i % 5).collect();
    let noise = noise_code(500, 4, 12);
    let r = task_eval_cv(&noise, &balanced, "random", ClassifierKind::Logistic, &cv).unwrap();
    assert!((0.14..=0.26).contains(&r.accuracy.mean), "{:?}", r.accuracy);
}

#[test]
fn weighted_f1_equals_macro_when_balanced() {
    let labels: Vec<usize> = (0..100).map(|i| i % 4).collect();
    let rows: Vec<Vec<f64>> = labels.iter().map(|&l| vec![l as f64 * 10.0, 0.0]).collect();
    let r = task_eval_cv(&Matrix::from_rows(&rows).unwrap(), &labels, "x", ClassifierKind::Logistic, &quick_cv()).unwrap();
    assert!((r.f1_weighted.mean - r.f1_macro.mean).abs() < 1e-12);
}

#[test]
fn rare_class_is_a_stratification_error() {
    let mut labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
    labels[0] = 2;
    let z = noise_code(40, 2, 0);
    let err = task_eval_cv(&z, &labels, "x", ClassifierKind::Logistic, &quick_cv()).unwrap_err();
    assert!(matches!(err, Error::Stratification(_)), "{err}");
}

#[test]
fn metrics_are_deterministic_and_in_range() {
    let f = factors(8);
    let z = noise_code(f.len(), 3, 13);
    let cfg = DciConfig { cv: quick_cv(), ..DciConfig::default() };
    let build = || MetricReport {
        mi: Some(mi_matrix(&z, 30).unwrap()),
        gcn: Some(gcn_score(&z).unwrap()),
        dci: Some(dci_scores(&z, &f, &cfg).unwrap()),
        modexp: Some(modularity_explicitness(&z, &f, &cfg.cv).unwrap()),
        irs: Some(irs_score(&z, &f).unwrap()),
        tasks: vec![task_eval_cv(&z, &f.codes[0], "vowel", ClassifierKind::RandomForest, &cfg.cv).unwrap()],
        ..MetricReport::default()
    };
    let (a, b) = (build(), build());
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    a.validate_ranges().unwrap();
}

#[test]
fn traversal_selects_two_dims_per_subspace() {
    let f = FactorTable::from_codes(vec!["speaker".into(), "vowel".into()], vec![vec![3; 50], (0..50).map(|i| i % 5).collect()]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let rows: Vec<Vec<f64>> = (0..50)
        .map(|i| vec![(i % 5) as f64 * 4.0 + rng.random::<f64>(), 0.01 * rng.random::<f64>(), 0.0, rng.random()])
        .collect();
    let t = latent_traversal_response(&Matrix::from_rows(&rows).unwrap(), &f, "speaker", "vowel", 2).unwrap();
    assert_eq!(t.selected, vec![(0, 1), (3, 2)]);
    assert_eq!(t.rows.len(), 5 * 2 * 2);
    assert_eq!(t.separated_values(0, DimRole::MaxVariance), 5);
    let csv = String::from_utf8(t.to_csv().unwrap()).unwrap();
    assert!(csv.starts_with("vowel,subspace,dim,role,mean,sd,count\n"));

    let flat = Matrix::from_rows(&vec![vec![0.5; 4]; 50]).unwrap();
    let t = latent_traversal_response(&flat, &f, "speaker", "vowel", 2).unwrap();
    assert!(t.rows.iter().all(|r| r.sd == 0.0));

    assert!(latent_traversal_response(&flat, &f, "vowel", "speaker", 2).is_err());
    assert!(latent_traversal_response(&flat, &f, "emotion", "vowel", 2).is_err());
}
