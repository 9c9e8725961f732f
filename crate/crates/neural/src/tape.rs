//! Reverse-mode differentiation over a linear tape of 2-D tensor ops.
//!
//! Every op appends a node holding its forward value; [`Tape::backward`]
//! walks the nodes in reverse and accumulates adjoints. Summation order is
//! fixed by node order, so repeated runs are bitwise reproducible.

use crate::tensor::{gemm_nn, gemm_nt, gemm_tn, Tensor};
use crate::Scalar;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Sparse row operator: output row `i` is `Σ w · x[j]` over `rows[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRows<T> {
    pub n_cols: usize,
    pub rows: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> SparseRows<T> {
    /// Row-normalised adjacency: each row averages its listed columns.
    pub fn mean_of(n_cols: usize, rows: Vec<Vec<usize>>) -> Self {
        let rows = rows
            .into_iter()
            .map(|cols| {
                let w = T::one() / T::lit(cols.len().max(1) as f64);
                cols.into_iter().map(|c| (c, w)).collect()
            })
            .collect();
        Self { n_cols, rows }
    }
}

const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_C: f64 = 0.044_715;
const LN_EPS: f64 = 1e-12;

enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Gelu(Var),
    Sigmoid(Var),
    Tanh(Var),
    LayerNorm {
        gamma: Var,
        beta: Var,
        x: Var,
        xhat: Vec<T>,
        inv_std: Vec<T>,
    },
    Concat(Var, Var),
    SliceCols {
        x: Var,
        start: usize,
    },
    GatherRows {
        x: Var,
        idx: Vec<usize>,
    },
    SpMM {
        adj: SparseRows<T>,
        x: Var,
    },
    ScatterRows {
        parts: Vec<(Var, Vec<usize>)>,
    },
    MeanRows(Var),
    Sum(Var),
    SoftmaxCe {
        logits: Var,
        targets: Vec<usize>,
        probs: Vec<T>,
    },
    Bce {
        logits: Var,
        targets: Vec<T>,
    },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Records a forward computation for later differentiation.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn gelu<T: Scalar>(x: T) -> T {
    let k = T::lit(GELU_K);
    let c = T::lit(GELU_C);
    let half = T::lit(0.5);
    half * x * (T::one() + (k * (x + c * x * x * x)).tanh())
}

fn gelu_grad<T: Scalar>(x: T) -> T {
    let k = T::lit(GELU_K);
    let c = T::lit(GELU_C);
    let half = T::lit(0.5);
    let t = (k * (x + c * x * x * x)).tanh();
    half * (T::one() + t) + half * x * (T::one() - t * t) * k * (T::one() + T::lit(3.0) * c * x * x)
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `log(1 + e^x)` without overflow.
fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A leaf that receives a gradient.
    pub fn variable(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// `a · b`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let [n, k] = self.value(a).shape();
        let [k2, m] = self.value(b).shape();
        assert_eq!(k, k2, "matmul inner dimensions");
        let mut out = Tensor::zeros(n, m);
        gemm_nn(self.value(a).data(), self.value(b).data(), out.data_mut(), n, k, m);
        let rg = self.rg(&[a, b]);
        self.push(out, Op::MatMul(a, b), rg)
    }

    /// `a · wᵀ`, the usual dense layer with `w: out x in`.
    pub fn matmul_t(&mut self, a: Var, w: Var) -> Var {
        let [n, k] = self.value(a).shape();
        let [m, k2] = self.value(w).shape();
        assert_eq!(k, k2, "matmul_t inner dimensions");
        let mut out = Tensor::zeros(n, m);
        gemm_nt(self.value(a).data(), self.value(w).data(), out.data_mut(), n, k, m);
        let rg = self.rg(&[a, w]);
        self.push(out, Op::MatMulT(a, w), rg)
    }

    /// `x · wᵀ + b` with `b` broadcast over rows.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let y = self.matmul_t(x, w);
        self.add_row(y, b)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).shape(), self.value(b).shape(), "add shapes");
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        let rg = self.rg(&[a, b]);
        self.push(out, Op::Add(a, b), rg)
    }

    /// `a + b` where `b` is `1 x cols` and broadcast over rows.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let [n, m] = self.value(a).shape();
        assert_eq!(self.value(b).shape(), [1, m], "add_row bias shape");
        let mut out = self.value(a).clone();
        let bias = self.value(b).data().to_vec();
        for i in 0..n {
            for (o, bv) in out.row_mut(i).iter_mut().zip(&bias) {
                *o = *o + *bv;
            }
        }
        let rg = self.rg(&[a, b]);
        self.push(out, Op::AddRow(a, b), rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).shape(), self.value(b).shape(), "mul shapes");
        let [n, m] = self.value(a).shape();
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| *x * *y)
            .collect();
        let out = Tensor::from_vec(n, m, data).expect("shape preserved");
        let rg = self.rg(&[a, b]);
        self.push(out, Op::Mul(a, b), rg)
    }

    pub fn scale(&mut self, a: Var, k: T) -> Var {
        let mut out = self.value(a).clone();
        out.scale_assign(k);
        let rg = self.rg(&[a]);
        self.push(out, Op::Scale(a, k), rg)
    }

    fn map(&mut self, a: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let [n, m] = self.value(a).shape();
        let data = self.value(a).data().iter().map(|x| f(*x)).collect();
        let out = Tensor::from_vec(n, m, data).expect("shape preserved");
        let rg = self.rg(&[a]);
        self.push(out, op, rg)
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        self.map(a, gelu, Op::Gelu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, |x| x.tanh(), Op::Tanh(a))
    }

    /// Row-wise layer normalisation with affine `gamma`, `beta` (`1 x cols`).
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let [n, m] = self.value(x).shape();
        assert_eq!(self.value(gamma).shape(), [1, m]);
        assert_eq!(self.value(beta).shape(), [1, m]);
        let mf = T::lit(m as f64);
        let eps = T::lit(LN_EPS);
        let mut xhat = Vec::with_capacity(n * m);
        let mut inv_std = Vec::with_capacity(n);
        let mut out = Tensor::zeros(n, m);
        {
            let xv = self.value(x);
            let g = self.value(gamma).data();
            let b = self.value(beta).data();
            for i in 0..n {
                let row = xv.row(i);
                let mean = row.iter().copied().sum::<T>() / mf;
                let var = row.iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>() / mf;
                let inv = T::one() / (var + eps).sqrt();
                inv_std.push(inv);
                let orow = out.row_mut(i);
                for j in 0..m {
                    let h = (row[j] - mean) * inv;
                    xhat.push(h);
                    orow[j] = g[j] * h + b[j];
                }
            }
        }
        let rg = self.rg(&[x, gamma, beta]);
        self.push(
            out,
            Op::LayerNorm {
                gamma,
                beta,
                x,
                xhat,
                inv_std,
            },
            rg,
        )
    }

    /// Column-wise concatenation `[a | b]`.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let [n, p] = self.value(a).shape();
        let [n2, q] = self.value(b).shape();
        assert_eq!(n, n2, "concat rows");
        let mut out = Tensor::zeros(n, p + q);
        for i in 0..n {
            let row = out.row_mut(i);
            row[..p].copy_from_slice(self.nodes[a.0].value.row(i));
            row[p..].copy_from_slice(self.nodes[b.0].value.row(i));
        }
        let rg = self.rg(&[a, b]);
        self.push(out, Op::Concat(a, b), rg)
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Var {
        let [n, m] = self.value(x).shape();
        assert!(start <= end && end <= m, "slice bounds");
        let w = end - start;
        let mut out = Tensor::zeros(n, w);
        for i in 0..n {
            out.row_mut(i)
                .copy_from_slice(&self.nodes[x.0].value.row(i)[start..end]);
        }
        let rg = self.rg(&[x]);
        self.push(out, Op::SliceCols { x, start }, rg)
    }

    /// Selects rows by index (embedding lookup when `x` is a table).
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Var {
        let m = self.value(x).cols();
        let mut out = Tensor::zeros(idx.len(), m);
        for (r, &i) in idx.iter().enumerate() {
            out.row_mut(r).copy_from_slice(self.nodes[x.0].value.row(i));
        }
        let rg = self.rg(&[x]);
        self.push(out, Op::GatherRows { x, idx: idx.to_vec() }, rg)
    }

    /// Sparse-times-dense: `adj · x`.
    pub fn spmm(&mut self, adj: SparseRows<T>, x: Var) -> Var {
        let [n_in, m] = self.value(x).shape();
        assert_eq!(adj.n_cols, n_in, "spmm inner dimension");
        let mut out = Tensor::zeros(adj.rows.len(), m);
        {
            let xv = &self.nodes[x.0].value;
            for (i, entries) in adj.rows.iter().enumerate() {
                let orow = out.row_mut(i);
                for &(j, w) in entries {
                    for (o, v) in orow.iter_mut().zip(xv.row(j)) {
                        *o = *o + w * *v;
                    }
                }
            }
        }
        let rg = self.rg(&[x]);
        self.push(out, Op::SpMM { adj, x }, rg)
    }

    /// An `n x cols` tensor where each part's rows are added at the given row indices.
    pub fn scatter_rows(&mut self, n: usize, cols: usize, parts: Vec<(Var, Vec<usize>)>) -> Var {
        let mut out = Tensor::zeros(n, cols);
        for (v, rows) in &parts {
            let pv = &self.nodes[v.0].value;
            assert_eq!(pv.rows(), rows.len(), "scatter row count");
            assert_eq!(pv.cols(), cols, "scatter cols");
            for (r, &target) in rows.iter().enumerate() {
                for (o, x) in out.row_mut(target).iter_mut().zip(pv.row(r)) {
                    *o = *o + *x;
                }
            }
        }
        let vars: Vec<Var> = parts.iter().map(|(v, _)| *v).collect();
        let rg = self.rg(&vars);
        self.push(out, Op::ScatterRows { parts }, rg)
    }

    /// Mean over rows, `1 x cols`.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let [n, m] = self.value(x).shape();
        let mut out = Tensor::zeros(1, m);
        let inv = T::one() / T::lit(n.max(1) as f64);
        for i in 0..n {
            for (o, v) in out.data_mut().iter_mut().zip(self.nodes[x.0].value.row(i)) {
                *o = *o + *v;
            }
        }
        out.scale_assign(inv);
        let rg = self.rg(&[x]);
        self.push(out, Op::MeanRows(x), rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().copied().sum();
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    /// Mean softmax cross-entropy of each logits row against its target class.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let [n, k] = self.value(logits).shape();
        assert_eq!(n, targets.len(), "one target per row");
        let mut probs = Vec::with_capacity(n * k);
        let mut loss = T::zero();
        for (i, &t) in targets.iter().enumerate() {
            let row = self.nodes[logits.0].value.row(i);
            let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
            let z: T = row.iter().map(|v| (*v - mx).exp()).sum();
            let log_z = z.ln() + mx;
            loss = loss + log_z - row[t];
            probs.extend(row.iter().map(|v| (*v - log_z).exp()));
        }
        if n > 0 {
            loss = loss / T::lit(n as f64);
        }
        let rg = self.rg(&[logits]);
        self.push(
            Tensor::scalar(loss),
            Op::SoftmaxCe {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            rg,
        )
    }

    /// Mean binary log loss of sigmoid(logits) against `targets` in `[0, 1]`.
    /// Zero elements yield a zero loss.
    pub fn binary_log_loss(&mut self, logits: Var, targets: &[T]) -> Var {
        let z = self.value(logits).data();
        assert_eq!(z.len(), targets.len(), "one target per logit");
        let mut loss = T::zero();
        for (x, y) in z.iter().zip(targets) {
            loss = loss + softplus(*x) - *y * *x;
        }
        if !z.is_empty() {
            loss = loss / T::lit(z.len() as f64);
        }
        let rg = self.rg(&[logits]);
        self.push(
            Tensor::scalar(loss),
            Op::Bce {
                logits,
                targets: targets.to_vec(),
            },
            rg,
        )
    }

    /// Reverse sweep from a `1 x 1` node.
    pub fn backward(&self, loss: Var) -> Gradients<T> {
        assert_eq!(self.value(loss).shape(), [1, 1], "backward needs a scalar");
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(T::one()));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    fn propagate(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let nodes = &self.nodes;
        let val = |v: Var| &nodes[v.0].value;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut Tensor<T>)| {
            if !nodes[v.0].requires_grad {
                return;
            }
            let slot = &mut grads[v.0];
            let t = slot.get_or_insert_with(|| {
                let [r, c] = nodes[v.0].value.shape();
                Tensor::zeros(r, c)
            });
            f(t);
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let [n, k] = val(*a).shape();
                let m = val(*b).cols();
                acc(*a, &mut |da| gemm_nt(g.data(), val(*b).data(), da.data_mut(), n, m, k));
                acc(*b, &mut |db| gemm_tn(val(*a).data(), g.data(), db.data_mut(), n, k, m));
            }
            Op::MatMulT(a, w) => {
                let [n, k] = val(*a).shape();
                let m = val(*w).rows();
                acc(*a, &mut |da| gemm_nn(g.data(), val(*w).data(), da.data_mut(), n, m, k));
                acc(*w, &mut |dw| gemm_tn(g.data(), val(*a).data(), dw.data_mut(), n, m, k));
            }
            Op::Add(a, b) => {
                acc(*a, &mut |da| da.add_assign(g));
                acc(*b, &mut |db| db.add_assign(g));
            }
            Op::AddRow(a, b) => {
                acc(*a, &mut |da| da.add_assign(g));
                acc(*b, &mut |db| {
                    let d = db.data_mut();
                    for i in 0..g.rows() {
                        for (o, x) in d.iter_mut().zip(g.row(i)) {
                            *o = *o + *x;
                        }
                    }
                });
            }
            Op::Mul(a, b) => {
                acc(*a, &mut |da| {
                    for ((o, gv), bv) in da.data_mut().iter_mut().zip(g.data()).zip(val(*b).data()) {
                        *o = *o + *gv * *bv;
                    }
                });
                acc(*b, &mut |db| {
                    for ((o, gv), av) in db.data_mut().iter_mut().zip(g.data()).zip(val(*a).data()) {
                        *o = *o + *gv * *av;
                    }
                });
            }
            Op::Scale(a, k) => {
                acc(*a, &mut |da| {
                    for (o, gv) in da.data_mut().iter_mut().zip(g.data()) {
                        *o = *o + *gv * *k;
                    }
                });
            }
            Op::Gelu(a) => {
                acc(*a, &mut |da| {
                    for ((o, gv), x) in da.data_mut().iter_mut().zip(g.data()).zip(val(*a).data()) {
                        *o = *o + *gv * gelu_grad(*x);
                    }
                });
            }
            Op::Sigmoid(a) => {
                acc(*a, &mut |da| {
                    for ((o, gv), y) in da.data_mut().iter_mut().zip(g.data()).zip(node.value.data()) {
                        *o = *o + *gv * *y * (T::one() - *y);
                    }
                });
            }
            Op::Tanh(a) => {
                acc(*a, &mut |da| {
                    for ((o, gv), y) in da.data_mut().iter_mut().zip(g.data()).zip(node.value.data()) {
                        *o = *o + *gv * (T::one() - *y * *y);
                    }
                });
            }
            Op::LayerNorm {
                gamma,
                beta,
                x,
                xhat,
                inv_std,
            } => {
                let [n, m] = g.shape();
                let gam = val(*gamma).data();
                acc(*x, &mut |dx| {
                    let mf = T::lit(m as f64);
                    for i in 0..n {
                        let gr = g.row(i);
                        let xh = &xhat[i * m..(i + 1) * m];
                        let mut s1 = T::zero();
                        let mut s2 = T::zero();
                        for j in 0..m {
                            let d = gr[j] * gam[j];
                            s1 = s1 + d;
                            s2 = s2 + d * xh[j];
                        }
                        let scale = inv_std[i] / mf;
                        let dr = dx.row_mut(i);
                        for j in 0..m {
                            let d = gr[j] * gam[j];
                            dr[j] = dr[j] + scale * (mf * d - s1 - xh[j] * s2);
                        }
                    }
                });
                acc(*gamma, &mut |dg| {
                    let d = dg.data_mut();
                    for i in 0..n {
                        for j in 0..m {
                            d[j] = d[j] + g.row(i)[j] * xhat[i * m + j];
                        }
                    }
                });
                acc(*beta, &mut |db| {
                    let d = db.data_mut();
                    for i in 0..n {
                        for (o, x) in d.iter_mut().zip(g.row(i)) {
                            *o = *o + *x;
                        }
                    }
                });
            }
            Op::Concat(a, b) => {
                let p = val(*a).cols();
                acc(*a, &mut |da| {
                    for i in 0..g.rows() {
                        for (o, x) in da.row_mut(i).iter_mut().zip(&g.row(i)[..p]) {
                            *o = *o + *x;
                        }
                    }
                });
                acc(*b, &mut |db| {
                    for i in 0..g.rows() {
                        for (o, x) in db.row_mut(i).iter_mut().zip(&g.row(i)[p..]) {
                            *o = *o + *x;
                        }
                    }
                });
            }
            Op::SliceCols { x, start } => {
                let w = g.cols();
                acc(*x, &mut |dx| {
                    for i in 0..g.rows() {
                        for (o, v) in dx.row_mut(i)[*start..*start + w].iter_mut().zip(g.row(i)) {
                            *o = *o + *v;
                        }
                    }
                });
            }
            Op::GatherRows { x, idx } => {
                acc(*x, &mut |dx| {
                    for (r, &i) in idx.iter().enumerate() {
                        for (o, v) in dx.row_mut(i).iter_mut().zip(g.row(r)) {
                            *o = *o + *v;
                        }
                    }
                });
            }
            Op::SpMM { adj, x } => {
                acc(*x, &mut |dx| {
                    for (i, entries) in adj.rows.iter().enumerate() {
                        let gr = g.row(i);
                        for &(j, w) in entries {
                            for (o, v) in dx.row_mut(j).iter_mut().zip(gr) {
                                *o = *o + w * *v;
                            }
                        }
                    }
                });
            }
            Op::ScatterRows { parts } => {
                for (v, rows) in parts {
                    acc(*v, &mut |dv| {
                        for (r, &target) in rows.iter().enumerate() {
                            for (o, x) in dv.row_mut(r).iter_mut().zip(g.row(target)) {
                                *o = *o + *x;
                            }
                        }
                    });
                }
            }
            Op::MeanRows(x) => {
                let n = val(*x).rows();
                let inv = T::one() / T::lit(n.max(1) as f64);
                acc(*x, &mut |dx| {
                    for i in 0..n {
                        for (o, v) in dx.row_mut(i).iter_mut().zip(g.data()) {
                            *o = *o + *v * inv;
                        }
                    }
                });
            }
            Op::Sum(x) => {
                let gv = g.item();
                acc(*x, &mut |dx| {
                    for o in dx.data_mut() {
                        *o = *o + gv;
                    }
                });
            }
            Op::SoftmaxCe { logits, targets, probs } => {
                let k = val(*logits).cols();
                let n = targets.len();
                let s = g.item() / T::lit(n.max(1) as f64);
                acc(*logits, &mut |dl| {
                    for (i, &t) in targets.iter().enumerate() {
                        let row = dl.row_mut(i);
                        for j in 0..k {
                            let onehot = if j == t { T::one() } else { T::zero() };
                            row[j] = row[j] + s * (probs[i * k + j] - onehot);
                        }
                    }
                });
            }
            Op::Bce { logits, targets } => {
                let n = targets.len();
                let s = g.item() / T::lit(n.max(1) as f64);
                acc(*logits, &mut |dl| {
                    for ((o, z), y) in dl.data_mut().iter_mut().zip(val(*logits).data()).zip(targets) {
                        *o = *o + s * (sigmoid(*z) - *y);
                    }
                });
            }
        }
    }
}

/// Adjoints produced by [`Tape::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}
