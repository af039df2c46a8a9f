//! Small deterministic classifiers for the probing metrics.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Logistic,
    RandomForest,
    Svm,
}

impl ClassifierKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(Self::Logistic),
            "random_forest" | "rf" => Ok(Self::RandomForest),
            "svm" => Ok(Self::Svm),
            other => Err(Error::InvalidArgument(format!(
                "unknown classifier '{other}' (expected logistic, random_forest or svm)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Logistic => "logistic",
            Self::RandomForest => "random_forest",
            Self::Svm => "svm",
        }
    }

    /// Regularization grid searched by the inner cross-validation: inverse
    /// penalty `C` for the linear models, minimum leaf size for the forest.
    pub fn grid(self) -> &'static [f64] {
        match self {
            Self::Logistic | Self::Svm => &[0.01, 0.1, 1.0, 10.0],
            Self::RandomForest => &[1.0, 5.0, 20.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Penalty {
    L1,
    L2,
}

/// `scores = x · weights + bias`, one column per class.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn scores(&self, x: &Matrix) -> Matrix {
        let mut s = x.matmul(&self.weights);
        for r in s.data.chunks_mut(self.bias.len()) {
            r.iter_mut().zip(&self.bias).for_each(|(v, b)| *v += b);
        }
        s
    }

    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        argmax_rows(&self.scores(x))
    }
}

pub fn argmax_rows(s: &Matrix) -> Vec<usize> {
    (0..s.rows)
        .map(|i| {
            let r = s.row(i);
            // first maximum wins so ties resolve to the lowest class
            let mut best = 0;
            for (j, v) in r.iter().enumerate() {
                if *v > r[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Largest eigenvalue of `[x 1]ᵀ[x 1]` by power iteration, padded by 5%.
fn gram_spectral_bound(x: &Matrix) -> f64 {
    let d = x.cols;
    let mut v = vec![1.0 / ((d + 1) as f64).sqrt(); d + 1];
    let mut lambda = 0.0;
    for _ in 0..50 {
        let mut u = vec![v[d]; x.rows];
        for (i, ui) in u.iter_mut().enumerate() {
            *ui += x.row(i).iter().zip(&v[..d]).map(|(a, b)| a * b).sum::<f64>();
        }
        let mut w = vec![0.0; d + 1];
        for (i, ui) in u.iter().enumerate() {
            w[..d].iter_mut().zip(x.row(i)).for_each(|(a, b)| *a += ui * b);
            w[d] += ui;
        }
        let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 1.0;
        }
        lambda = norm;
        v = w.into_iter().map(|a| a / norm).collect();
    }
    lambda * 1.05
}

/// Accelerated proximal gradient (FISTA with adaptive restart) over a
/// `d × k` weight matrix plus an unpenalised `k`-bias. `l1` is the
/// soft-threshold weight applied to the weights only.
fn accelerated<G>(d: usize, k: usize, lipschitz: f64, l1: f64, max_iter: usize, tol: f64, mut grad: G) -> LinearModel
where
    G: FnMut(&LinearModel) -> (Matrix, Vec<f64>),
{
    let step = 1.0 / lipschitz;
    let mut x = LinearModel { weights: Matrix::zeros(d, k), bias: vec![0.0; k] };
    let mut y = x.clone();
    let mut t = 1.0f64;
    for _ in 0..max_iter {
        let (gw, gb) = grad(&y);
        let mut next = y.clone();
        for (w, g) in next.weights.data.iter_mut().zip(&gw.data) {
            let z = *w - step * g;
            *w = z.signum() * (z.abs() - step * l1).max(0.0);
        }
        next.bias.iter_mut().zip(&gb).for_each(|(b, g)| *b -= step * g);

        let mut restart = 0.0;
        let mut change = 0.0f64;
        let mut scale = 1.0f64;
        let pairs = next.weights.data.iter().zip(&x.weights.data).zip(&y.weights.data);
        let bias_pairs = next.bias.iter().zip(&x.bias).zip(&y.bias);
        for ((n, o), yy) in pairs.chain(bias_pairs) {
            restart += (yy - n) * (n - o);
            change = change.max((n - o).abs());
            scale = scale.max(n.abs());
        }
        let t_next = if restart > 0.0 { 1.0 } else { (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0 };
        let momentum = if restart > 0.0 { 0.0 } else { (t - 1.0) / t_next };
        y = next.clone();
        for (yv, (n, o)) in y.weights.data.iter_mut().zip(next.weights.data.iter().zip(&x.weights.data)) {
            *yv = n + momentum * (n - o);
        }
        for (yv, (n, o)) in y.bias.iter_mut().zip(next.bias.iter().zip(&x.bias)) {
            *yv = n + momentum * (n - o);
        }
        t = t_next;
        x = next;
        if change < tol * scale {
            break;
        }
    }
    x
}

fn check_labels(x: &Matrix, y: &[usize], k: usize) -> Result<()> {
    if x.rows != y.len() || x.rows == 0 {
        return Err(Error::shape("classifier", format!("{} rows, {} labels", x.rows, y.len())));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= k) {
        return Err(Error::InvalidArgument(format!("label {bad} outside {k} classes")));
    }
    Ok(())
}

/// Multinomial logistic regression minimising mean cross-entropy plus
/// `penalty / (c · n)` on the weights.
pub fn fit_logistic(x: &Matrix, y: &[usize], k: usize, c: f64, penalty: Penalty, max_iter: usize) -> Result<LinearModel> {
    check_labels(x, y, k)?;
    let n = x.rows as f64;
    let lambda = 1.0 / (c * n);
    let (l1, l2) = match penalty {
        Penalty::L1 => (lambda, 0.0),
        Penalty::L2 => (0.0, lambda),
    };
    let lipschitz = 0.5 * gram_spectral_bound(x) / n + l2;
    Ok(accelerated(x.cols, k, lipschitz, l1, max_iter, 1e-6, |m| {
        let mut p = m.scores(x);
        for (r, &yi) in p.data.chunks_mut(k).zip(y) {
            let max = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            r.iter_mut().for_each(|v| {
                *v = (*v - max).exp();
                z += *v;
            });
            r.iter_mut().for_each(|v| *v /= z * n);
            r[yi] -= 1.0 / n;
        }
        let mut gw = x.t_matmul(&p);
        if l2 > 0.0 {
            gw.data.iter_mut().zip(&m.weights.data).for_each(|(g, w)| *g += l2 * w);
        }
        let mut gb = vec![0.0; k];
        for r in p.data.chunks(k) {
            gb.iter_mut().zip(r).for_each(|(g, v)| *g += v);
        }
        (gw, gb)
    }))
}

/// One-vs-rest linear SVM with squared hinge loss and an L2 penalty
/// `1 / (2 c n) ‖w‖²`.
pub fn fit_linear_svm(x: &Matrix, y: &[usize], k: usize, c: f64, max_iter: usize) -> Result<LinearModel> {
    check_labels(x, y, k)?;
    let n = x.rows as f64;
    let lambda = 1.0 / (c * n);
    let lipschitz = 2.0 * gram_spectral_bound(x) / n + lambda;
    Ok(accelerated(x.cols, k, lipschitz, 0.0, max_iter, 1e-6, |m| {
        let mut g = m.scores(x);
        for (r, &yi) in g.data.chunks_mut(k).zip(y) {
            for (j, v) in r.iter_mut().enumerate() {
                let s = if j == yi { 1.0 } else { -1.0 };
                let margin = 1.0 - s * *v;
                *v = if margin > 0.0 { -2.0 * s * margin / n } else { 0.0 };
            }
        }
        let mut gw = x.t_matmul(&g);
        gw.data.iter_mut().zip(&m.weights.data).for_each(|(a, w)| *a += lambda * w);
        let mut gb = vec![0.0; k];
        for r in g.data.chunks(k) {
            gb.iter_mut().zip(r).for_each(|(a, v)| *a += v);
        }
        (gw, gb)
    }))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 50, max_depth: 12, min_leaf: 1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Leaf(Vec<f64>),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn proba(&self, x: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(p) => return p,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

struct TreeBuilder<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    k: usize,
    cfg: ForestConfig,
    max_features: usize,
    nodes: Vec<Node>,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

impl TreeBuilder<'_> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let mut p = vec![0.0; self.k];
        for &i in idx {
            p[self.y[i]] += 1.0;
        }
        p.iter_mut().for_each(|v| *v /= idx.len() as f64);
        self.nodes.push(Node::Leaf(p));
        self.nodes.len() - 1
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let mut counts = vec![0usize; self.k];
        for &i in &idx {
            counts[self.y[i]] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.cfg.max_depth || idx.len() < 2 * self.cfg.min_leaf {
            return self.leaf(&idx);
        }
        let parent = gini(&counts, idx.len());
        let mut best: Option<(f64, usize, f64)> = None;
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(idx.len());
        for feature in sample(rng, self.x.cols, self.max_features).into_iter() {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.x.get(i, feature), self.y[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = vec![0usize; self.k];
            let mut right = counts.clone();
            for s in 1..pairs.len() {
                let c = pairs[s - 1].1;
                left[c] += 1;
                right[c] -= 1;
                if pairs[s].0 == pairs[s - 1].0 || s < self.cfg.min_leaf || pairs.len() - s < self.cfg.min_leaf {
                    continue;
                }
                let n = pairs.len() as f64;
                let impurity = (s as f64 * gini(&left, s) + (n - s as f64) * gini(&right, pairs.len() - s)) / n;
                let gain = parent - impurity;
                if gain > 1e-12 && best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, feature, 0.5 * (pairs[s - 1].0 + pairs[s].0)));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return self.leaf(&idx);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| self.x.get(i, feature) <= threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf(Vec::new()));
        let left = self.build(l, depth + 1, rng);
        let right = self.build(r, depth + 1, rng);
        self.nodes[at] = Node::Split { feature, threshold, left, right };
        at
    }
}

/// Bagged CART trees with Gini splits over `√d` random features per node.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomForest {
    trees: Vec<Tree>,
    k: usize,
}

impl RandomForest {
    pub fn fit(x: &Matrix, y: &[usize], k: usize, cfg: ForestConfig, seed: u64) -> Result<Self> {
        check_labels(x, y, k)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let max_features = ((x.cols as f64).sqrt().round() as usize).clamp(1, x.cols.max(1));
        let mut trees = Vec::with_capacity(cfg.n_trees);
        for _ in 0..cfg.n_trees {
            let boot: Vec<usize> = (0..x.rows).map(|_| rng.random_range(0..x.rows)).collect();
            let mut b = TreeBuilder { x, y, k, cfg, max_features, nodes: Vec::new() };
            b.build(boot, 0, &mut rng);
            trees.push(Tree { nodes: b.nodes });
        }
        Ok(Self { trees, k })
    }

    pub fn proba(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows, self.k);
        for i in 0..x.rows {
            for t in &self.trees {
                out.data[i * self.k..(i + 1) * self.k].iter_mut().zip(t.proba(x.row(i))).for_each(|(o, p)| *o += p);
            }
        }
        out
    }

    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        argmax_rows(&self.proba(x))
    }
}

pub const MAX_ITER: usize = 500;

/// Standardizes on the training rows, fits `kind` with regularization
/// `param` and predicts the test rows.
pub fn fit_predict(
    kind: ClassifierKind,
    param: f64,
    train: (&Matrix, &[usize]),
    k: usize,
    test: &Matrix,
    seed: u64,
) -> Result<Vec<usize>> {
    let (x, y) = train;
    let (mean, sd) = x.column_moments();
    let (xs, ts) = (x.standardized(&mean, &sd), test.standardized(&mean, &sd));
    Ok(match kind {
        ClassifierKind::Logistic => fit_logistic(&xs, y, k, param, Penalty::L2, MAX_ITER)?.predict(&ts),
        ClassifierKind::Svm => fit_linear_svm(&xs, y, k, param, MAX_ITER)?.predict(&ts),
        ClassifierKind::RandomForest => {
            let cfg = ForestConfig { min_leaf: param.max(1.0) as usize, ..ForestConfig::default() };
            RandomForest::fit(&xs, y, k, cfg, seed)?.predict(&ts)
        }
    })
}
