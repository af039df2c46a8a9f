//! Wengert-list reverse-mode differentiation.
//!
//! Every primitive appends a node holding its output value and whatever
//! intermediates its pullback needs. Nodes are appended in evaluation order,
//! so the list is already topologically sorted and `backward` is a single
//! reverse sweep.

use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};

const LAYER_NORM_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddScalar(Var),
    Scale(Var, f64),
    Exp(Var),
    Log(Var),
    Gelu(Var),
    Clamp { x: Var, lo: f64, hi: f64 },
    Linear { x: Var, w: Var, b: Option<Var>, rows: usize, fan_in: usize, fan_out: usize },
    Conv1d(Box<ConvSaved>),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, rstd: Vec<f64> },
    Softmax(Var),
    LogSoftmax(Var),
    Sum(Var),
    Mean(Var),
    SumLast(Var),
    Concat { inputs: Vec<Var>, axis_sizes: Vec<usize>, outer: usize, inner: usize },
    MeanPool { x: Var, n: usize, t: usize, c: usize },
    Reshape(Var),
    GatherRows { x: Var, idx: Vec<usize>, row_len: usize },
}

#[derive(Clone, Debug)]
struct ConvSaved {
    x: Var,
    w: Var,
    b: Option<Var>,
    n: usize,
    t_in: usize,
    t_out: usize,
    c_in: usize,
    c_out: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    cols: Vec<f64>,
}

#[derive(Clone, Debug)]
struct Node {
    value: Vec<f64>,
    shape: Vec<usize>,
    requires_grad: bool,
    op: Op,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Copies the gradient of `v` into the tensor's grad buffer (accumulating).
    pub fn write_into(&self, v: Var, tensor: &mut Tensor) -> Result<()> {
        match self.get(v) {
            Some(g) => tensor.accumulate_grad(g),
            None => tensor.accumulate_grad(&vec![0.0; tensor.numel()]),
        }
    }
}

/// Recorded computation. Create one per forward pass.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// `c = a · b (+ c if accumulate)` for row-major matrices described by strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    c: &mut [f64],
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: callers pass slices whose extents cover every strided access.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn gelu_fwd(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<f64>, shape: Vec<usize>, requires_grad: bool, op: Op) -> Var {
        debug_assert_eq!(value.len(), numel(&shape));
        self.nodes.push(Node { value, shape, requires_grad, op });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Places a copy of `t` on the tape. Gradients flow to it iff `t.requires_grad()`.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push(t.data().to_vec(), t.shape().to_vec(), t.requires_grad(), Op::Leaf)
    }

    pub fn constant(&mut self, shape: Vec<usize>, data: Vec<f64>) -> Result<Var> {
        let t = Tensor::new(shape, data)?;
        Ok(self.leaf(&t))
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.node(v).value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.node(v).shape
    }

    pub fn to_tensor(&self, v: Var) -> Tensor {
        let n = self.node(v);
        Tensor::new(n.shape.clone(), n.value.clone()).expect("tape node holds a valid tensor")
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.node(v).value[0]
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::shape(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn zip_with(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, rec: Op) -> Result<Var> {
        self.same_shape(op, a, b)?;
        let value: Vec<f64> =
            self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| f(x, y)).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, shape, rg, rec))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, rec: Op) -> Var {
        let value: Vec<f64> = self.value(a).iter().map(|&x| f(x)).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a]);
        self.push(value, shape, rg, rec)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.map(a, |x| x + c, Op::AddScalar(a))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, |x| x * c, Op::Scale(a, c))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, f64::exp, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.map(a, f64::ln, Op::Log(a))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        self.map(a, gelu_fwd, Op::Gelu(a))
    }

    /// Elementwise clamp; the gradient is zero where the input lies outside `[lo, hi]`.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.map(a, |x| x.clamp(lo, hi), Op::Clamp { x: a, lo, hi })
    }

    /// Affine map over the last axis: `x[.., in] · w[in, out] + b[out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let ws = self.shape(w).to_vec();
        if ws.len() != 2 {
            return Err(Error::shape("linear", format!("weight must be 2-D, got {ws:?}")));
        }
        let (fan_in, fan_out) = (ws[0], ws[1]);
        let xs = self.shape(x).to_vec();
        if *xs.last().unwrap_or(&0) != fan_in {
            return Err(Error::shape("linear", format!("input {xs:?} against weight {ws:?}")));
        }
        if let Some(b) = b {
            if self.shape(b) != [fan_out] {
                return Err(Error::shape(
                    "linear",
                    format!("bias {:?} against weight {ws:?}", self.shape(b)),
                ));
            }
        }
        let rows = numel(&xs) / fan_in;
        let mut out = vec![0.0; rows * fan_out];
        if let Some(b) = b {
            let bv = self.value(b);
            for r in out.chunks_mut(fan_out) {
                r.copy_from_slice(bv);
            }
        }
        gemm(
            rows,
            fan_in,
            fan_out,
            self.value(x),
            (fan_in as isize, 1),
            self.value(w),
            (fan_out as isize, 1),
            &mut out,
            b.is_some(),
        );
        let mut shape = xs;
        *shape.last_mut().unwrap() = fan_out;
        let mut deps = vec![x, w];
        deps.extend(b);
        let rg = self.rg(&deps);
        Ok(self.push(out, shape, rg, Op::Linear { x, w, b, rows, fan_in, fan_out }))
    }

    /// 1-D convolution over the time axis of a channels-last input.
    ///
    /// `x`: `[N, T, C_in]`, `w`: `[K, C_in, C_out]`, `b`: `[C_out]`. Output is
    /// `[N, T_out, C_out]` with `T_out = (T + 2·pad − K) / stride + 1`.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if xs.len() != 3 || ws.len() != 3 || ws[1] != xs[2] {
            return Err(Error::shape("conv1d", format!("input {xs:?} against kernel {ws:?}")));
        }
        if stride == 0 {
            return Err(Error::shape("conv1d", "stride must be positive".to_string()));
        }
        let (n, t_in, c_in) = (xs[0], xs[1], xs[2]);
        let (kernel, c_out) = (ws[0], ws[2]);
        if t_in + 2 * pad < kernel {
            return Err(Error::shape(
                "conv1d",
                format!("time length {t_in} with padding {pad} is shorter than kernel {kernel}"),
            ));
        }
        if let Some(b) = b {
            if self.shape(b) != [c_out] {
                return Err(Error::shape("conv1d", format!("bias {:?} for {c_out} channels", self.shape(b))));
            }
        }
        let t_out = (t_in + 2 * pad - kernel) / stride + 1;
        let kc = kernel * c_in;
        let xv = self.value(x);
        let mut cols = vec![0.0; n * t_out * kc];
        for s in 0..n {
            let xs_ = &xv[s * t_in * c_in..(s + 1) * t_in * c_in];
            for t in 0..t_out {
                let row = &mut cols[(s * t_out + t) * kc..(s * t_out + t + 1) * kc];
                for k in 0..kernel {
                    let src = (t * stride + k) as isize - pad as isize;
                    if src >= 0 && (src as usize) < t_in {
                        let src = src as usize;
                        row[k * c_in..(k + 1) * c_in].copy_from_slice(&xs_[src * c_in..(src + 1) * c_in]);
                    }
                }
            }
        }
        let mut out = vec![0.0; n * t_out * c_out];
        if let Some(b) = b {
            let bv = self.value(b);
            for r in out.chunks_mut(c_out) {
                r.copy_from_slice(bv);
            }
        }
        gemm(
            n * t_out,
            kc,
            c_out,
            &cols,
            (kc as isize, 1),
            self.value(w),
            (c_out as isize, 1),
            &mut out,
            b.is_some(),
        );
        let mut deps = vec![x, w];
        deps.extend(b);
        let rg = self.rg(&deps);
        let saved = ConvSaved { x, w, b, n, t_in, t_out, c_in, c_out, kernel, stride, pad, cols };
        Ok(self.push(out, vec![n, t_out, c_out], rg, Op::Conv1d(Box::new(saved))))
    }

    /// Layer normalization over the last axis with learned gain and bias.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let c = *xs.last().unwrap();
        if self.shape(gamma) != [c] || self.shape(beta) != [c] {
            return Err(Error::shape(
                "layer_norm",
                format!("input {xs:?} with gain {:?} and bias {:?}", self.shape(gamma), self.shape(beta)),
            ));
        }
        let xv = self.value(x);
        let (g, bt) = (self.value(gamma), self.value(beta));
        let rows = xv.len() / c;
        let mut xhat = vec![0.0; xv.len()];
        let mut rstd = vec![0.0; rows];
        let mut out = vec![0.0; xv.len()];
        for r in 0..rows {
            let row = &xv[r * c..(r + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let rs = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            rstd[r] = rs;
            for j in 0..c {
                let h = (row[j] - mean) * rs;
                xhat[r * c + j] = h;
                out[r * c + j] = g[j] * h + bt[j];
            }
        }
        let rg = self.rg(&[x, gamma, beta]);
        Ok(self.push(out, xs, rg, Op::LayerNorm { x, gamma, beta, xhat, rstd }))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Var {
        let shape = self.shape(a).to_vec();
        let c = *shape.last().unwrap();
        let mut out = self.value(a).to_vec();
        for row in out.chunks_mut(c) {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                s += *v;
            }
            row.iter_mut().for_each(|v| *v /= s);
        }
        let rg = self.rg(&[a]);
        self.push(out, shape, rg, Op::Softmax(a))
    }

    /// Log-softmax over the last axis.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let shape = self.shape(a).to_vec();
        let c = *shape.last().unwrap();
        let mut out = self.value(a).to_vec();
        for row in out.chunks_mut(c) {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            row.iter_mut().for_each(|v| *v -= lse);
        }
        let rg = self.rg(&[a]);
        self.push(out, shape, rg, Op::LogSoftmax(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        let rg = self.rg(&[a]);
        self.push(vec![s], vec![1], rg, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let s = v.iter().sum::<f64>() / v.len() as f64;
        let rg = self.rg(&[a]);
        self.push(vec![s], vec![1], rg, Op::Mean(a))
    }

    /// Sums out the last axis. A 1-D input reduces to shape `[1]`.
    pub fn sum_last(&mut self, a: Var) -> Var {
        let shape = self.shape(a).to_vec();
        let c = *shape.last().unwrap();
        let out: Vec<f64> = self.value(a).chunks(c).map(|r| r.iter().sum()).collect();
        let mut new_shape = shape[..shape.len() - 1].to_vec();
        if new_shape.is_empty() {
            new_shape.push(1);
        }
        let rg = self.rg(&[a]);
        self.push(out, new_shape, rg, Op::SumLast(a))
    }

    /// Concatenates along `axis`; all other dimensions must agree.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::shape("concat", "no inputs".to_string()))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(Error::shape("concat", format!("axis {axis} out of range for {base:?}")));
        }
        let mut axis_sizes = Vec::with_capacity(inputs.len());
        for &v in inputs {
            let s = self.shape(v);
            let ok = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !ok {
                return Err(Error::shape("concat", format!("{base:?} vs {s:?} along axis {axis}")));
            }
            axis_sizes.push(s[axis]);
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let total: usize = axis_sizes.iter().sum();
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (&v, &sz) in inputs.iter().zip(&axis_sizes) {
                let chunk = sz * inner;
                out.extend_from_slice(&self.value(v)[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let rg = self.rg(inputs);
        Ok(self.push(out, shape, rg, Op::Concat { inputs: inputs.to_vec(), axis_sizes, outer, inner }))
    }

    /// Mean over axis 1 of a `[N, T, C]` tensor.
    pub fn mean_pool(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 {
            return Err(Error::shape("mean_pool", format!("expected [N, T, C], got {s:?}")));
        }
        let (n, t, c) = (s[0], s[1], s[2]);
        let xv = self.value(x);
        let mut out = vec![0.0; n * c];
        for i in 0..n {
            let o = &mut out[i * c..(i + 1) * c];
            for k in 0..t {
                let row = &xv[(i * t + k) * c..(i * t + k + 1) * c];
                o.iter_mut().zip(row).for_each(|(a, b)| *a += b);
            }
            o.iter_mut().for_each(|a| *a /= t as f64);
        }
        let rg = self.rg(&[x]);
        Ok(self.push(out, vec![n, c], rg, Op::MeanPool { x, n, t, c }))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        if numel(&shape) != numel(self.shape(x)) || shape.contains(&0) {
            return Err(Error::shape("reshape", format!("{:?} -> {shape:?}", self.shape(x))));
        }
        let value = self.value(x).to_vec();
        let rg = self.rg(&[x]);
        Ok(self.push(value, shape, rg, Op::Reshape(x)))
    }

    /// Selects rows (slices along axis 0) in the given order; repeats allowed.
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if idx.is_empty() {
            return Err(Error::shape("gather_rows", "empty index list".to_string()));
        }
        let rows = s[0];
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(Error::shape("gather_rows", format!("row {bad} out of range for {s:?}")));
        }
        let row_len = numel(&s[1..]);
        let xv = self.value(x);
        let mut out = Vec::with_capacity(idx.len() * row_len);
        for &i in idx {
            out.extend_from_slice(&xv[i * row_len..(i + 1) * row_len]);
        }
        let mut shape = s;
        shape[0] = idx.len();
        let rg = self.rg(&[x]);
        Ok(self.push(out, shape, rg, Op::GatherRows { x, idx: idx.to_vec(), row_len }))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let idx: Vec<usize> = (start..start + len).collect();
        self.gather_rows(x, &idx)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let ls = self.shape(loss);
        if numel(ls) != 1 {
            return Err(Error::NonScalarLoss(ls.to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.pullback(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        grads.resize(self.nodes.len(), None);
        Ok(Gradients { grads })
    }

    fn pullback(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
            f(slot);
        };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(*a, &mut |s| s.iter_mut().zip(g).for_each(|(x, y)| *x += y));
                acc(*b, &mut |s| s.iter_mut().zip(g).for_each(|(x, y)| *x += y));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |s| s.iter_mut().zip(g).for_each(|(x, y)| *x += y));
                acc(*b, &mut |s| s.iter_mut().zip(g).for_each(|(x, y)| *x -= y));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                acc(*a, &mut |s| {
                    for k in 0..s.len() {
                        s[k] += g[k] * bv[k];
                    }
                });
                acc(*b, &mut |s| {
                    for k in 0..s.len() {
                        s[k] += g[k] * av[k];
                    }
                });
            }
            Op::Div(a, b) => {
                let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                acc(*a, &mut |s| {
                    for k in 0..s.len() {
                        s[k] += g[k] / bv[k];
                    }
                });
                acc(*b, &mut |s| {
                    for k in 0..s.len() {
                        s[k] -= g[k] * av[k] / (bv[k] * bv[k]);
                    }
                });
            }
            Op::AddScalar(a) => acc(*a, &mut |s| s.iter_mut().zip(g).for_each(|(x, y)| *x += y)),
            Op::Scale(a, c) => acc(*a, &mut |s| s.iter_mut().zip(g).for_each(|(x, y)| *x += c * y)),
            Op::Exp(a) => {
                let out = &node.value;
                acc(*a, &mut |s| {
                    for k in 0..s.len() {
                        s[k] += g[k] * out[k];
                    }
                });
            }
            Op::Log(a) => {
                let av = &self.nodes[a.0].value;
                acc(*a, &mut |s| {
                    for k in 0..s.len() {
                        s[k] += g[k] / av[k];
                    }
                });
            }
            Op::Gelu(a) => {
                let av = &self.nodes[a.0].value;
                acc(*a, &mut |s| {
                    for k in 0..s.len() {
                        s[k] += g[k] * gelu_grad(av[k]);
                    }
                });
            }
            Op::Clamp { x, lo, hi } => {
                let xv = &self.nodes[x.0].value;
                acc(*x, &mut |s| {
                    for k in 0..s.len() {
                        if xv[k] >= *lo && xv[k] <= *hi {
                            s[k] += g[k];
                        }
                    }
                });
            }
            Op::Linear { x, w, b, rows, fan_in, fan_out } => {
                let (rows, fi, fo) = (*rows, *fan_in, *fan_out);
                let (xv, wv) = (&self.nodes[x.0].value, &self.nodes[w.0].value);
                // dx = g · wᵀ
                acc(*x, &mut |s| {
                    gemm(rows, fo, fi, g, (fo as isize, 1), wv, (1, fo as isize), s, true)
                });
                // dw = xᵀ · g
                acc(*w, &mut |s| {
                    gemm(fi, rows, fo, xv, (1, fi as isize), g, (fo as isize, 1), s, true)
                });
                if let Some(b) = b {
                    acc(*b, &mut |s| {
                        for r in g.chunks(fo) {
                            s.iter_mut().zip(r).for_each(|(x, y)| *x += y);
                        }
                    });
                }
            }
            Op::Conv1d(cs) => {
                let kc = cs.kernel * cs.c_in;
                let m = cs.n * cs.t_out;
                let co = cs.c_out;
                if self.nodes[cs.w.0].requires_grad {
                    acc(cs.w, &mut |s| {
                        gemm(kc, m, co, &cs.cols, (1, kc as isize), g, (co as isize, 1), s, true)
                    });
                }
                if let Some(b) = cs.b {
                    acc(b, &mut |s| {
                        for r in g.chunks(co) {
                            s.iter_mut().zip(r).for_each(|(x, y)| *x += y);
                        }
                    });
                }
                if self.nodes[cs.x.0].requires_grad {
                    let wv = &self.nodes[cs.w.0].value;
                    let mut dcols = vec![0.0; m * kc];
                    gemm(m, co, kc, g, (co as isize, 1), wv, (1, co as isize), &mut dcols, false);
                    acc(cs.x, &mut |s| {
                        for smp in 0..cs.n {
                            for t in 0..cs.t_out {
                                let row = &dcols[(smp * cs.t_out + t) * kc..(smp * cs.t_out + t + 1) * kc];
                                for k in 0..cs.kernel {
                                    let src = (t * cs.stride + k) as isize - cs.pad as isize;
                                    if src >= 0 && (src as usize) < cs.t_in {
                                        let base = (smp * cs.t_in + src as usize) * cs.c_in;
                                        s[base..base + cs.c_in]
                                            .iter_mut()
                                            .zip(&row[k * cs.c_in..(k + 1) * cs.c_in])
                                            .for_each(|(x, y)| *x += y);
                                    }
                                }
                            }
                        }
                    });
                }
            }
            Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                let c = self.nodes[gamma.0].value.len();
                let gv = &self.nodes[gamma.0].value;
                acc(*gamma, &mut |s| {
                    for (gr, xr) in g.chunks(c).zip(xhat.chunks(c)) {
                        for j in 0..c {
                            s[j] += gr[j] * xr[j];
                        }
                    }
                });
                acc(*beta, &mut |s| {
                    for gr in g.chunks(c) {
                        s.iter_mut().zip(gr).for_each(|(x, y)| *x += y);
                    }
                });
                acc(*x, &mut |s| {
                    let mut dxhat = vec![0.0; c];
                    for (r, (gr, xr)) in g.chunks(c).zip(xhat.chunks(c)).enumerate() {
                        let mut m1 = 0.0;
                        let mut m2 = 0.0;
                        for j in 0..c {
                            dxhat[j] = gr[j] * gv[j];
                            m1 += dxhat[j];
                            m2 += dxhat[j] * xr[j];
                        }
                        m1 /= c as f64;
                        m2 /= c as f64;
                        let out = &mut s[r * c..(r + 1) * c];
                        for j in 0..c {
                            out[j] += rstd[r] * (dxhat[j] - m1 - xr[j] * m2);
                        }
                    }
                });
            }
            Op::Softmax(a) => {
                let c = *node.shape.last().unwrap();
                let y = &node.value;
                acc(*a, &mut |s| {
                    for ((sr, yr), gr) in s.chunks_mut(c).zip(y.chunks(c)).zip(g.chunks(c)) {
                        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for j in 0..c {
                            sr[j] += yr[j] * (gr[j] - dot);
                        }
                    }
                });
            }
            Op::LogSoftmax(a) => {
                let c = *node.shape.last().unwrap();
                let y = &node.value;
                acc(*a, &mut |s| {
                    for ((sr, yr), gr) in s.chunks_mut(c).zip(y.chunks(c)).zip(g.chunks(c)) {
                        let total: f64 = gr.iter().sum();
                        for j in 0..c {
                            sr[j] += gr[j] - yr[j].exp() * total;
                        }
                    }
                });
            }
            Op::Sum(a) => acc(*a, &mut |s| s.iter_mut().for_each(|x| *x += g[0])),
            Op::Mean(a) => {
                let n = self.nodes[a.0].value.len() as f64;
                acc(*a, &mut |s| s.iter_mut().for_each(|x| *x += g[0] / n));
            }
            Op::SumLast(a) => {
                let c = *self.nodes[a.0].shape.last().unwrap();
                acc(*a, &mut |s| {
                    for (sr, gv) in s.chunks_mut(c).zip(g) {
                        sr.iter_mut().for_each(|x| *x += gv);
                    }
                });
            }
            Op::Concat { inputs, axis_sizes, outer, inner } => {
                let total: usize = axis_sizes.iter().sum();
                let mut offset = 0;
                for (&v, &sz) in inputs.iter().zip(axis_sizes) {
                    let chunk = sz * inner;
                    acc(v, &mut |s| {
                        for o in 0..*outer {
                            let src = &g[o * total * inner + offset..o * total * inner + offset + chunk];
                            s[o * chunk..(o + 1) * chunk].iter_mut().zip(src).for_each(|(x, y)| *x += y);
                        }
                    });
                    offset += chunk;
                }
            }
            Op::MeanPool { x, n, t, c } => {
                let (n, t, c) = (*n, *t, *c);
                acc(*x, &mut |s| {
                    for i in 0..n {
                        let gr = &g[i * c..(i + 1) * c];
                        for k in 0..t {
                            let o = &mut s[(i * t + k) * c..(i * t + k + 1) * c];
                            o.iter_mut().zip(gr).for_each(|(a, b)| *a += b / t as f64);
                        }
                    }
                });
            }
            Op::Reshape(x) => acc(*x, &mut |s| s.iter_mut().zip(g).for_each(|(a, b)| *a += b)),
            Op::GatherRows { x, idx, row_len } => {
                let rl = *row_len;
                acc(*x, &mut |s| {
                    for (k, &i) in idx.iter().enumerate() {
                        s[i * rl..(i + 1) * rl]
                            .iter_mut()
                            .zip(&g[k * rl..(k + 1) * rl])
                            .for_each(|(a, b)| *a += b);
                    }
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn identity_linear() {
        let mut tape = Tape::new();
        let x = tape.leaf(&t(&[1, 2], &[1.0, 2.0]));
        let w = tape.leaf(&t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]));
        let b = tape.leaf(&t(&[2], &[0.0, 0.0]));
        let y = tape.linear(x, w, Some(b)).unwrap();
        assert_eq!(tape.value(y), &[1.0, 2.0]);
    }

    #[test]
    fn uniform_softmax_and_gelu_zero() {
        let mut tape = Tape::new();
        let x = tape.leaf(&t(&[3], &[0.0, 0.0, 0.0]));
        let y = tape.softmax(x);
        for &p in tape.value(y) {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let z = tape.gelu(x);
        assert_eq!(tape.value(z), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = Tape::new();
        let x = tape.leaf(&t(&[2, 3], &[1.0, -2.0, 3.0, 0.5, 0.0, 9.0]).with_grad());
        let s = tape.sum(x);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap(), &[1.0; 6]);
    }

    #[test]
    fn square_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(&t(&[1], &[3.0]).with_grad());
        let sq = tape.mul(x, x).unwrap();
        let s = tape.sum(sq);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap(), &[6.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf(&t(&[2], &[1.0, 2.0]).with_grad());
        assert!(matches!(tape.backward(x), Err(Error::NonScalarLoss(_))));
    }

    #[test]
    fn shape_errors_name_the_primitive() {
        let mut tape = Tape::new();
        let a = tape.leaf(&t(&[2], &[1.0, 2.0]));
        let b = tape.leaf(&t(&[3], &[1.0, 2.0, 3.0]));
        let err = tape.add(a, b).unwrap_err().to_string();
        assert!(err.contains("add"), "{err}");
        assert!(err.contains("[2]") && err.contains("[3]"), "{err}");
        let w = tape.leaf(&t(&[3, 1], &[1.0, 1.0, 1.0]));
        let err = tape.linear(a, w, None).unwrap_err().to_string();
        assert!(err.contains("linear"), "{err}");
    }

    #[test]
    fn conv_matches_direct_sum() {
        // x: [1, 4, 2], kernel 3, pad 1, stride 1
        let xd: Vec<f64> = (0..8).map(|i| i as f64 * 0.5 - 1.0).collect();
        let wd: Vec<f64> = (0..18).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let mut tape = Tape::new();
        let x = tape.leaf(&t(&[1, 4, 2], &xd));
        let w = tape.leaf(&t(&[3, 2, 3], &wd));
        let y = tape.conv1d(x, w, None, 1, 1).unwrap();
        assert_eq!(tape.shape(y), &[1, 4, 3]);
        for to in 0..4 {
            for co in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    let ti = to as isize + k as isize - 1;
                    if !(0..4).contains(&ti) {
                        continue;
                    }
                    for ci in 0..2 {
                        s += xd[ti as usize * 2 + ci] * wd[(k * 2 + ci) * 3 + co];
                    }
                }
                assert!((tape.value(y)[to * 3 + co] - s).abs() < 1e-12);
            }
        }
        let y2 = tape.conv1d(x, w, None, 2, 0).unwrap();
        assert_eq!(tape.shape(y2), &[1, 1, 3]);
    }

    #[test]
    fn reuse_accumulates() {
        // f = sum(x) + sum(x*x) => grad = 1 + 2x
        let mut tape = Tape::new();
        let x = tape.leaf(&t(&[3], &[1.0, -1.0, 0.5]).with_grad());
        let a = tape.sum(x);
        let sq = tape.mul(x, x).unwrap();
        let b = tape.sum(sq);
        let f = tape.add(a, b).unwrap();
        let g = tape.backward(f).unwrap();
        assert_eq!(g.get(x).unwrap(), &[3.0, -1.0, 2.0]);
    }

    #[test]
    fn concat_middle_axis() {
        let mut tape = Tape::new();
        let a = tape.leaf(&t(&[2, 1], &[1.0, 2.0]));
        let b = tape.leaf(&t(&[2, 2], &[3.0, 4.0, 5.0, 6.0]));
        let c = tape.concat(&[a, b], 1).unwrap();
        assert_eq!(tape.shape(c), &[2, 3]);
        assert_eq!(tape.value(c), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
    }
}
