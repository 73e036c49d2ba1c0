//! Eager reverse-mode differentiation over dense matrices.
//!
//! Every operation computes its value immediately and records how to push
//! gradients back to its inputs. Parameters enter as [`Tape::param`] leaves and
//! [`Tape::backward`] returns one gradient per parameter index.

use std::borrow::Cow;
use std::sync::Arc;

use super::tensor::{Matrix, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Constant,
    Param(usize),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Relu(Var),
    Tanh(Var),
    Elu(Var),
    LeakyRelu(Var, f64),
    MulConst(Var, Arc<Vec<f64>>),
    SpMM(Arc<SparseMatrix>, Var),
    ConcatCols(Vec<Var>),
    GatherRows(Var, Arc<Vec<usize>>),
    ScatterAddRows(Var, Arc<Vec<usize>>),
    SegmentSoftmax(Var, Arc<Vec<usize>>),
    RowScale(Var, Var),
    RowPrefixToColumn(Var),
    BceWithLogits(Var, Arc<Vec<f64>>),
}

struct Node<'p> {
    value: Cow<'p, Matrix>,
    op: Op,
    needs_grad: bool,
}

/// Parameter leaves borrow their values for `'p`; everything else is owned.
#[derive(Default)]
pub struct Tape<'p> {
    nodes: Vec<Node<'p>>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, value: Matrix, op: Op, inputs: &[Var]) -> Var {
        self.push_cow(Cow::Owned(value), op, inputs)
    }

    fn push_cow(&mut self, value: Cow<'p, Matrix>, op: Op, inputs: &[Var]) -> Var {
        let needs_grad = match op {
            Op::Param(_) => true,
            _ => inputs.iter().any(|v| self.nodes[v.0].needs_grad),
        };
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn constant(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Constant, &[])
    }

    pub fn param(&mut self, index: usize, m: &'p Matrix) -> Var {
        self.push_cow(Cow::Borrowed(m), Op::Param(index), &[])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b), &[a, b])
    }

    /// Adds a `1 x c` bias row to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Var {
        let mut v = self.value(a).clone();
        let b = self.value(bias);
        assert_eq!((1, v.cols), b.shape(), "bias shape mismatch");
        for r in 0..v.rows {
            for (x, y) in v.row_mut(r).iter_mut().zip(&b.data) {
                *x += y;
            }
        }
        self.push(v, Op::AddBias(a, bias), &[a, bias])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b), &[a, b])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a), &[a])
    }

    pub fn elu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| if x > 0.0 { x } else { x.exp_m1() });
        self.push(v, Op::Elu(a), &[a])
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let v = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        self.push(v, Op::LeakyRelu(a, slope), &[a])
    }

    /// Elementwise product with a fixed mask (dropout).
    pub fn mul_const(&mut self, a: Var, mask: Vec<f64>) -> Var {
        let mut v = self.value(a).clone();
        assert_eq!(v.data.len(), mask.len(), "mask shape mismatch");
        for (x, m) in v.data.iter_mut().zip(&mask) {
            *x *= m;
        }
        self.push(v, Op::MulConst(a, Arc::new(mask)), &[a])
    }

    pub fn spmm(&mut self, s: Arc<SparseMatrix>, h: Var) -> Var {
        let v = s.mul_dense(self.value(h));
        self.push(v, Op::SpMM(s, h), &[h])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut v = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for &p in parts {
                let src = self.value(p);
                assert_eq!(src.rows, rows, "concat row mismatch");
                v.row_mut(r)[off..off + src.cols].copy_from_slice(src.row(r));
                off += src.cols;
            }
        }
        self.push(v, Op::ConcatCols(parts.to_vec()), parts)
    }

    /// Row `k` of the result is row `index[k]` of `a`.
    pub fn gather_rows(&mut self, a: Var, index: Arc<Vec<usize>>) -> Var {
        let src = self.value(a);
        let mut v = Matrix::zeros(index.len(), src.cols);
        for (k, &i) in index.iter().enumerate() {
            v.row_mut(k).copy_from_slice(src.row(i));
        }
        self.push(v, Op::GatherRows(a, index), &[a])
    }

    /// Row `i` of the result sums the rows `k` of `a` with `index[k] == i`.
    pub fn scatter_add_rows(&mut self, a: Var, index: Arc<Vec<usize>>, rows: usize) -> Var {
        let src = self.value(a);
        let mut v = Matrix::zeros(rows, src.cols);
        for (k, &i) in index.iter().enumerate() {
            for (o, x) in v.row_mut(i).iter_mut().zip(src.row(k)) {
                *o += x;
            }
        }
        self.push(v, Op::ScatterAddRows(a, index), &[a])
    }

    /// Softmax of a column vector within groups sharing the same `segment` id.
    pub fn segment_softmax(&mut self, e: Var, segment: Arc<Vec<usize>>) -> Var {
        let src = self.value(e);
        assert_eq!(src.cols, 1, "segment softmax expects a column");
        let groups = segment.iter().copied().max().map_or(0, |m| m + 1);
        let mut max = vec![f64::NEG_INFINITY; groups];
        for (k, &s) in segment.iter().enumerate() {
            max[s] = max[s].max(src.data[k]);
        }
        let mut exp: Vec<f64> = segment
            .iter()
            .enumerate()
            .map(|(k, &s)| (src.data[k] - max[s]).exp())
            .collect();
        let mut sum = vec![0.0; groups];
        for (k, &s) in segment.iter().enumerate() {
            sum[s] += exp[k];
        }
        for (k, &s) in segment.iter().enumerate() {
            exp[k] /= sum[s];
        }
        self.push(Matrix::column(exp), Op::SegmentSoftmax(e, segment), &[e])
    }

    /// Scales row `k` of `m` by `s[k]`, where `s` is a column.
    pub fn row_scale(&mut self, m: Var, s: Var) -> Var {
        let mut v = self.value(m).clone();
        let scale = &self.value(s).data;
        for (r, &c) in scale.iter().enumerate() {
            for x in v.row_mut(r) {
                *x *= c;
            }
        }
        self.push(v, Op::RowScale(m, s), &[m, s])
    }

    /// First `n` entries of a `1 x m` row, as an `n x 1` column.
    pub fn row_prefix_to_column(&mut self, a: Var, n: usize) -> Var {
        let src = self.value(a);
        assert_eq!(src.rows, 1, "expected a row vector");
        let v = Matrix::column(src.data[..n].to_vec());
        self.push(v, Op::RowPrefixToColumn(a), &[a])
    }

    /// Mean binary cross-entropy of `sigmoid(logits)` against `targets`.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Vec<f64>) -> Var {
        let z = self.value(logits);
        assert_eq!(z.data.len(), targets.len(), "target length mismatch");
        let total: f64 = z
            .data
            .iter()
            .zip(&targets)
            .map(|(&x, &y)| x.max(0.0) - x * y + (-x.abs()).exp().ln_1p())
            .sum();
        let v = Matrix::from_vec(1, 1, vec![total / targets.len() as f64]);
        self.push(v, Op::BceWithLogits(logits, Arc::new(targets)), &[logits])
    }

    /// Gradients of the scalar `loss` with respect to each parameter index.
    pub fn backward(&self, loss: Var, param_count: usize) -> Vec<Option<Matrix>> {
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::from_vec(1, 1, vec![1.0]));
        let mut out: Vec<Option<Matrix>> = (0..param_count).map(|_| None).collect();

        fn acc(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let wants = |v: &Var| self.nodes[v.0].needs_grad;
            match &node.op {
                Op::Constant => {}
                Op::Param(p) => match &mut out[*p] {
                    Some(existing) => existing.add_assign(&g),
                    slot => *slot = Some(g),
                },
                Op::MatMul(a, b) => {
                    if wants(a) {
                        acc(&mut grads, *a, g.matmul_t(self.value(*b)));
                    }
                    if wants(b) {
                        acc(&mut grads, *b, self.value(*a).t_matmul(&g));
                    }
                }
                Op::AddBias(a, b) => {
                    if wants(b) {
                        let mut gb = Matrix::zeros(1, g.cols);
                        for r in 0..g.rows {
                            for (o, x) in gb.data.iter_mut().zip(g.row(r)) {
                                *o += x;
                            }
                        }
                        acc(&mut grads, *b, gb);
                    }
                    if wants(a) {
                        acc(&mut grads, *a, g);
                    }
                }
                Op::Add(a, b) => {
                    if wants(a) {
                        acc(&mut grads, *a, g.clone());
                    }
                    if wants(b) {
                        acc(&mut grads, *b, g);
                    }
                }
                Op::Relu(a) => {
                    let mut g = g;
                    for (x, y) in g.data.iter_mut().zip(&node.value.data) {
                        if *y <= 0.0 {
                            *x = 0.0;
                        }
                    }
                    acc(&mut grads, *a, g);
                }
                Op::Tanh(a) => {
                    let mut g = g;
                    for (x, y) in g.data.iter_mut().zip(&node.value.data) {
                        *x *= 1.0 - y * y;
                    }
                    acc(&mut grads, *a, g);
                }
                Op::Elu(a) => {
                    let mut g = g;
                    let input = &self.value(*a).data;
                    for ((x, y), i) in g.data.iter_mut().zip(&node.value.data).zip(input) {
                        if *i <= 0.0 {
                            *x *= y + 1.0;
                        }
                    }
                    acc(&mut grads, *a, g);
                }
                Op::LeakyRelu(a, slope) => {
                    let mut g = g;
                    for (x, i) in g.data.iter_mut().zip(&self.value(*a).data) {
                        if *i <= 0.0 {
                            *x *= slope;
                        }
                    }
                    acc(&mut grads, *a, g);
                }
                Op::MulConst(a, mask) => {
                    let mut g = g;
                    for (x, m) in g.data.iter_mut().zip(mask.iter()) {
                        *x *= m;
                    }
                    acc(&mut grads, *a, g);
                }
                Op::SpMM(s, h) => acc(&mut grads, *h, s.t_mul_dense(&g)),
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let cols = self.value(*p).cols;
                        if wants(p) {
                            let mut gp = Matrix::zeros(g.rows, cols);
                            for r in 0..g.rows {
                                gp.row_mut(r).copy_from_slice(&g.row(r)[off..off + cols]);
                            }
                            acc(&mut grads, *p, gp);
                        }
                        off += cols;
                    }
                }
                Op::GatherRows(a, index) => {
                    let src = self.value(*a);
                    let mut ga = Matrix::zeros(src.rows, src.cols);
                    for (k, &i) in index.iter().enumerate() {
                        for (o, x) in ga.row_mut(i).iter_mut().zip(g.row(k)) {
                            *o += x;
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::ScatterAddRows(a, index) => {
                    let mut ga = Matrix::zeros(index.len(), g.cols);
                    for (k, &i) in index.iter().enumerate() {
                        ga.row_mut(k).copy_from_slice(g.row(i));
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::SegmentSoftmax(e, segment) => {
                    let y = &node.value.data;
                    let groups = segment.iter().copied().max().map_or(0, |m| m + 1);
                    let mut dot = vec![0.0; groups];
                    for (k, &s) in segment.iter().enumerate() {
                        dot[s] += y[k] * g.data[k];
                    }
                    let ge = segment
                        .iter()
                        .enumerate()
                        .map(|(k, &s)| y[k] * (g.data[k] - dot[s]))
                        .collect();
                    acc(&mut grads, *e, Matrix::column(ge));
                }
                Op::RowScale(m, s) => {
                    let mv = self.value(*m);
                    let sv = &self.value(*s).data;
                    if wants(s) {
                        let gs = (0..mv.rows)
                            .map(|r| mv.row(r).iter().zip(g.row(r)).map(|(a, b)| a * b).sum())
                            .collect();
                        acc(&mut grads, *s, Matrix::column(gs));
                    }
                    if wants(m) {
                        let mut gm = g;
                        for (r, &c) in sv.iter().enumerate() {
                            for x in gm.row_mut(r) {
                                *x *= c;
                            }
                        }
                        acc(&mut grads, *m, gm);
                    }
                }
                Op::RowPrefixToColumn(a) => {
                    let cols = self.value(*a).cols;
                    let mut ga = Matrix::zeros(1, cols);
                    ga.data[..g.rows].copy_from_slice(&g.data);
                    acc(&mut grads, *a, ga);
                }
                Op::BceWithLogits(z, targets) => {
                    let zs = &self.value(*z).data;
                    let scale = g.data[0] / targets.len() as f64;
                    let gz = zs
                        .iter()
                        .zip(targets.iter())
                        .map(|(&x, &y)| (sigmoid(x) - y) * scale)
                        .collect();
                    acc(&mut grads, *z, Matrix::column(gz));
                }
            }
        }
        out
    }
}
