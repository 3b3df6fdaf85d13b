//! Define-by-run reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every operation of one forward pass as a node holding
//! its value and whatever the backward rule needs. [`Tape::backward`] walks
//! the nodes once in reverse creation order. Tapes are cheap and are rebuilt
//! for every forward pass.

use crate::error::TensorError;
use crate::tensor::kernels::{self, gemm_nn, gemm_nt, gemm_tn};
use crate::tensor::Tensor;

type Result<T> = std::result::Result<T, TensorError>;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul { a: Var, b: Var },
    /// a · bᵀ
    MatMulBt { a: Var, b: Var },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    /// Adds a length-`cols` row to every row of a matrix.
    AddRow { x: Var, row: Var },
    Scale { x: Var, c: f64 },
    LeakyRelu { x: Var, slope: f64 },
    Tanh { x: Var },
    Softplus { x: Var },
    Square { x: Var },
    Sum { x: Var },
    Mean { x: Var },
    SliceRows { x: Var, start: usize },
    /// W / (uᵀWv) with u, v held constant.
    SpectralNormalize { w: Var, u: Vec<f64>, v: Vec<f64>, sigma: f64 },
    /// Batch normalization over rows using batch statistics.
    BatchNormTrain { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    /// Batch normalization with fixed statistics.
    BatchNormFixed { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

/// Batch statistics computed by [`Tape::batch_norm_train`].
#[derive(Debug, Clone)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Biased (population) variance of the batch.
    pub var: Vec<f64>,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad, grad: None });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Records an input tensor. Gradients are only tracked when `requires_grad`.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Accumulated gradient of a node, if backward has reached it.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = ta.dims2()?;
        let (k2, n) = tb.dims2()?;
        if k != k2 {
            return Err(TensorError::Dimension {
                op: "matmul",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let mut out = vec![0.0; m * n];
        gemm_nn(ta.data(), tb.data(), &mut out, m, k, n);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul { a, b }, rg))
    }

    /// `a · bᵀ` for `a: [m×k]`, `b: [n×k]`; the dense-layer product `x · Wᵀ`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = ta.dims2()?;
        let (n, k2) = tb.dims2()?;
        if k != k2 {
            return Err(TensorError::Dimension {
                op: "matmul_bt",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let mut out = vec![0.0; m * n];
        gemm_nt(ta.data(), tb.data(), &mut out, m, k, n);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMulBt { a, b }, rg))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(TensorError::Dimension { op, lhs: sa.to_vec(), rhs: sb.to_vec() });
        }
        Ok(())
    }

    fn map(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let t = self.value(x);
        let data = t.data().iter().map(|&v| f(v)).collect();
        let value = Tensor::new(t.shape().to_vec(), data).expect("shape preserved");
        let rg = self.rg(x);
        self.push(value, op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let data = zip_map(self.value(a), self.value(b), |x, y| x + y);
        let value = Tensor::new(self.value(a).shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Add { a, b }, rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let data = zip_map(self.value(a), self.value(b), |x, y| x - y);
        let value = Tensor::new(self.value(a).shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Sub { a, b }, rg))
    }

    /// Adds the vector `row` to each row of matrix `x` (bias addition).
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (tx, tr) = (self.value(x), self.value(row));
        let (_, c) = tx.dims2()?;
        if tr.numel() != c {
            return Err(TensorError::Dimension {
                op: "add_row",
                lhs: tx.shape().to_vec(),
                rhs: tr.shape().to_vec(),
            });
        }
        let mut data = tx.data().to_vec();
        for chunk in data.chunks_exact_mut(c) {
            for (d, &b) in chunk.iter_mut().zip(tr.data()) {
                *d += b;
            }
        }
        let value = Tensor::new(tx.shape().to_vec(), data)?;
        let rg = self.rg(x) || self.rg(row);
        Ok(self.push(value, Op::AddRow { x, row }, rg))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.map(x, Op::Scale { x, c }, |v| c * v)
    }

    pub fn negate(&mut self, x: Var) -> Var {
        self.scale(x, -1.0)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        self.map(x, Op::LeakyRelu { x, slope }, |v| if v >= 0.0 { v } else { slope * v })
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map(x, Op::Tanh { x }, f64::tanh)
    }

    /// Elementwise ln(1 + eˣ), stabilized as max(x, 0) + ln(1 + e^{-|x|}).
    pub fn softplus(&mut self, x: Var) -> Var {
        self.map(x, Op::Softplus { x }, kernels::softplus)
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.map(x, Op::Square { x }, |v| v * v)
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.numel() == 0 {
            return Err(TensorError::Domain("sum of an empty tensor".into()));
        }
        let s = t.data().iter().sum();
        let rg = self.rg(x);
        Ok(self.push(Tensor::scalar(s), Op::Sum { x }, rg))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.numel() == 0 {
            return Err(TensorError::Domain("mean of an empty tensor".into()));
        }
        let s: f64 = t.data().iter().sum();
        let m = s / t.numel() as f64;
        let rg = self.rg(x);
        Ok(self.push(Tensor::scalar(m), Op::Mean { x }, rg))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let t = self.value(x);
        let (r, _) = t.dims2()?;
        if start > end || end > r {
            return Err(TensorError::Contract(format!(
                "row slice {start}..{end} out of range for {r} rows"
            )));
        }
        let value = t.slice_rows(start, end);
        let rg = self.rg(x);
        Ok(self.push(value, Op::SliceRows { x, start }, rg))
    }

    /// Divides matrix `w` by `σ = uᵀWv`, treating `u` and `v` as constants.
    ///
    /// `σ` is clamped below at 1e-12 so a zero matrix maps to a zero matrix.
    pub fn spectral_normalize(&mut self, w: Var, u: &[f64], v: &[f64]) -> Result<(Var, f64)> {
        let tw = self.value(w);
        let (r, c) = tw.dims2()?;
        if u.len() != r || v.len() != c {
            return Err(TensorError::Dimension {
                op: "spectral_normalize",
                lhs: tw.shape().to_vec(),
                rhs: vec![u.len(), v.len()],
            });
        }
        let sigma = bilinear(tw.data(), u, v, r, c).max(SIGMA_FLOOR);
        let data = tw.data().iter().map(|&x| x / sigma).collect();
        let value = Tensor::new(vec![r, c], data)?;
        let rg = self.rg(w);
        let op = Op::SpectralNormalize { w, u: u.to_vec(), v: v.to_vec(), sigma };
        Ok((self.push(value, op, rg), sigma))
    }

    /// Normalizes each column of `x` by its batch mean and biased variance,
    /// then applies `gamma`/`beta`. Requires at least two rows.
    pub fn batch_norm_train(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        eps: f64,
    ) -> Result<(Var, BatchStats)> {
        let tx = self.value(x);
        let (n, d) = tx.dims2()?;
        if n < 2 {
            return Err(TensorError::Contract(format!(
                "batch norm in train mode needs batch >= 2, got {n}"
            )));
        }
        self.check_affine("batch_norm_train", x, gamma, beta)?;
        let tx = self.value(x);
        let mut mean = vec![0.0; d];
        for row in tx.data().chunks_exact(d) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; d];
        for row in tx.data().chunks_exact(d) {
            for j in 0..d {
                let dv = row[j] - mean[j];
                var[j] += dv * dv;
            }
        }
        var.iter_mut().for_each(|v| *v /= n as f64);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let (xhat, out) = self.affine_normalize(x, gamma, beta, &mean, &inv_std);
        let value = Tensor::new(vec![n, d], out)?;
        let rg = self.rg(x) || self.rg(gamma) || self.rg(beta);
        let op = Op::BatchNormTrain { x, gamma, beta, xhat, inv_std };
        Ok((self.push(value, op, rg), BatchStats { mean, var }))
    }

    /// Batch normalization with externally supplied statistics.
    pub fn batch_norm_fixed(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mean: &[f64],
        var: &[f64],
        eps: f64,
    ) -> Result<Var> {
        self.check_affine("batch_norm_fixed", x, gamma, beta)?;
        let (n, d) = self.value(x).dims2()?;
        if mean.len() != d || var.len() != d {
            return Err(TensorError::Dimension {
                op: "batch_norm_fixed",
                lhs: vec![n, d],
                rhs: vec![mean.len(), var.len()],
            });
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let (xhat, out) = self.affine_normalize(x, gamma, beta, mean, &inv_std);
        let value = Tensor::new(vec![n, d], out)?;
        let rg = self.rg(x) || self.rg(gamma) || self.rg(beta);
        let op = Op::BatchNormFixed { x, gamma, beta, xhat, inv_std };
        Ok(self.push(value, op, rg))
    }

    fn check_affine(&self, op: &'static str, x: Var, gamma: Var, beta: Var) -> Result<()> {
        let (_, d) = self.value(x).dims2()?;
        for p in [gamma, beta] {
            if self.value(p).numel() != d {
                return Err(TensorError::Dimension {
                    op,
                    lhs: self.value(x).shape().to_vec(),
                    rhs: self.value(p).shape().to_vec(),
                });
            }
        }
        Ok(())
    }

    fn affine_normalize(
        &self,
        x: Var,
        gamma: Var,
        beta: Var,
        mean: &[f64],
        inv_std: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let tx = self.value(x);
        let d = mean.len();
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let mut xhat = Vec::with_capacity(tx.numel());
        let mut out = Vec::with_capacity(tx.numel());
        for row in tx.data().chunks_exact(d) {
            for j in 0..d {
                let h = (row[j] - mean[j]) * inv_std[j];
                xhat.push(h);
                out.push(g[j] * h + b[j]);
            }
        }
        (xhat, out)
    }

    /// Backpropagates from a scalar `loss`, accumulating into every node that
    /// requires a gradient. Gradients add up across calls until [`zero_grad`].
    ///
    /// [`zero_grad`]: Tape::zero_grad
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let lt = self.value(loss);
        if lt.numel() != 1 {
            return Err(TensorError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lt.shape()
            )));
        }
        if !self.rg(loss) {
            return Ok(());
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            self.propagate(idx, &g, &mut grads);
            let node = &mut self.nodes[idx];
            match &mut node.grad {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                None => node.grad = Some(g),
            }
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let out = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let (m, k) = self.value(*a).dims2().unwrap();
                let n = self.value(*b).cols();
                if self.rg(*a) {
                    // dA = G · Bᵀ
                    let buf = slot(grads, *a, m * k);
                    gemm_nt(g, self.value(*b).data(), buf, m, n, k);
                }
                if self.rg(*b) {
                    // dB = Aᵀ · G
                    let buf = slot(grads, *b, k * n);
                    gemm_tn(self.value(*a).data(), g, buf, m, k, n);
                }
            }
            Op::MatMulBt { a, b } => {
                let (m, k) = self.value(*a).dims2().unwrap();
                let n = self.value(*b).rows();
                if self.rg(*a) {
                    // dA = G · B
                    let buf = slot(grads, *a, m * k);
                    gemm_nn(g, self.value(*b).data(), buf, m, n, k);
                }
                if self.rg(*b) {
                    // dB = Gᵀ · A
                    let buf = slot(grads, *b, n * k);
                    gemm_tn(g, self.value(*a).data(), buf, m, n, k);
                }
            }
            Op::Add { a, b } => {
                for (v, sign) in [(*a, 1.0), (*b, 1.0)] {
                    if self.rg(v) {
                        axpy(slot(grads, v, g.len()), sign, g);
                    }
                }
            }
            Op::Sub { a, b } => {
                for (v, sign) in [(*a, 1.0), (*b, -1.0)] {
                    if self.rg(v) {
                        axpy(slot(grads, v, g.len()), sign, g);
                    }
                }
            }
            Op::AddRow { x, row } => {
                if self.rg(*x) {
                    axpy(slot(grads, *x, g.len()), 1.0, g);
                }
                if self.rg(*row) {
                    let c = self.value(*row).numel();
                    let buf = slot(grads, *row, c);
                    for chunk in g.chunks_exact(c) {
                        axpy(buf, 1.0, chunk);
                    }
                }
            }
            Op::Scale { x, c } => {
                if self.rg(*x) {
                    axpy(slot(grads, *x, g.len()), *c, g);
                }
            }
            Op::LeakyRelu { x, slope } => {
                if self.rg(*x) {
                    let input = self.value(*x).data();
                    let buf = slot(grads, *x, g.len());
                    for i in 0..g.len() {
                        buf[i] += if input[i] >= 0.0 { g[i] } else { slope * g[i] };
                    }
                }
            }
            Op::Tanh { x } => {
                if self.rg(*x) {
                    let buf = slot(grads, *x, g.len());
                    for i in 0..g.len() {
                        buf[i] += g[i] * (1.0 - out[i] * out[i]);
                    }
                }
            }
            Op::Softplus { x } => {
                if self.rg(*x) {
                    let input = self.value(*x).data();
                    let buf = slot(grads, *x, g.len());
                    for i in 0..g.len() {
                        buf[i] += g[i] * kernels::sigmoid(input[i]);
                    }
                }
            }
            Op::Square { x } => {
                if self.rg(*x) {
                    let input = self.value(*x).data();
                    let buf = slot(grads, *x, g.len());
                    for i in 0..g.len() {
                        buf[i] += 2.0 * input[i] * g[i];
                    }
                }
            }
            Op::Sum { x } => {
                if self.rg(*x) {
                    let n = self.value(*x).numel();
                    slot(grads, *x, n).iter_mut().for_each(|b| *b += g[0]);
                }
            }
            Op::Mean { x } => {
                if self.rg(*x) {
                    let n = self.value(*x).numel();
                    let share = g[0] / n as f64;
                    slot(grads, *x, n).iter_mut().for_each(|b| *b += share);
                }
            }
            Op::SliceRows { x, start } => {
                if self.rg(*x) {
                    let t = self.value(*x);
                    let c = t.cols();
                    let buf = slot(grads, *x, t.numel());
                    axpy(&mut buf[start * c..start * c + g.len()], 1.0, g);
                }
            }
            Op::SpectralNormalize { w, u, v, sigma } => {
                if self.rg(*w) {
                    // d(W/σ) with σ = uᵀWv:  G/σ − ⟨G, W⟩/σ² · u vᵀ
                    let wd = self.value(*w).data();
                    let c = v.len();
                    let inner = kernels::dot(g, wd);
                    let k = inner / (sigma * sigma);
                    let buf = slot(grads, *w, g.len());
                    for (i, &ui) in u.iter().enumerate() {
                        for (j, &vj) in v.iter().enumerate() {
                            let p = i * c + j;
                            buf[p] += g[p] / sigma - k * ui * vj;
                        }
                    }
                }
            }
            Op::BatchNormTrain { x, gamma, beta, xhat, inv_std } => {
                let d = inv_std.len();
                let n = g.len() / d;
                let gam = self.value(*gamma).data();
                let (sum_g, sum_gx) = column_sums(g, xhat, d);
                if self.rg(*gamma) {
                    axpy(slot(grads, *gamma, d), 1.0, &sum_gx);
                }
                if self.rg(*beta) {
                    axpy(slot(grads, *beta, d), 1.0, &sum_g);
                }
                if self.rg(*x) {
                    let nf = n as f64;
                    let buf = slot(grads, *x, g.len());
                    for r in 0..n {
                        for j in 0..d {
                            let p = r * d + j;
                            let k = gam[j] * inv_std[j] / nf;
                            buf[p] += k * (nf * g[p] - sum_g[j] - xhat[p] * sum_gx[j]);
                        }
                    }
                }
            }
            Op::BatchNormFixed { x, gamma, beta, xhat, inv_std } => {
                let d = inv_std.len();
                let gam = self.value(*gamma).data();
                let (sum_g, sum_gx) = column_sums(g, xhat, d);
                if self.rg(*gamma) {
                    axpy(slot(grads, *gamma, d), 1.0, &sum_gx);
                }
                if self.rg(*beta) {
                    axpy(slot(grads, *beta, d), 1.0, &sum_g);
                }
                if self.rg(*x) {
                    let buf = slot(grads, *x, g.len());
                    for (p, (b, gv)) in buf.iter_mut().zip(g).enumerate() {
                        let j = p % d;
                        *b += gv * gam[j] * inv_std[j];
                    }
                }
            }
        }
    }
}

const SIGMA_FLOOR: f64 = 1e-12;

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect()
}

fn column_sums(g: &[f64], xhat: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut sum_g = vec![0.0; d];
    let mut sum_gx = vec![0.0; d];
    for (grow, hrow) in g.chunks_exact(d).zip(xhat.chunks_exact(d)) {
        for j in 0..d {
            sum_g[j] += grow[j];
            sum_gx[j] += grow[j] * hrow[j];
        }
    }
    (sum_g, sum_gx)
}

/// uᵀ W v for row-major `w: [r×c]`.
pub(crate) fn bilinear(w: &[f64], u: &[f64], v: &[f64], r: usize, c: usize) -> f64 {
    (0..r).map(|i| u[i] * kernels::dot(&w[i * c..(i + 1) * c], v)).sum()
}
