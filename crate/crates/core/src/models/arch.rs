//! Forward passes for the four scorer variants.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::context::{GraphContext, IndexPairs};
use super::tape::{sigmoid, Tape, Var};
use super::tensor::{Matrix, SparseMatrix};
use super::{ModelParams, Variant};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

pub const LEAKY_SLOPE: f64 = 0.2;
pub const DIVERGENCE_LIMIT: f64 = 1e6;

pub enum Mode<'a> {
    Eval,
    /// Dropout masks are drawn from the given generator.
    Train(&'a mut ChaCha8Rng),
}

pub struct Forward<'a> {
    pub tape: Tape<'a>,
    /// `n x 1` pre-sigmoid scores.
    pub logits: Var,
    pub param_vars: Vec<Var>,
    /// Diffusion steps taken (GNN only).
    pub gnn_iterations: Option<usize>,
    /// Max-norm state change after each diffusion step (GNN only).
    pub gnn_changes: Vec<f64>,
    /// Final node states (GNN only).
    pub gnn_states: Option<Matrix>,
}

impl Forward<'_> {
    pub fn scores(&self) -> Vec<f64> {
        self.tape
            .value(self.logits)
            .data
            .iter()
            .map(|&z| sigmoid(z))
            .collect()
    }
}

/// `D^{-1/2} (A + I) D^{-1/2}` with `D` the degree including the self-loop.
pub fn normalized_adjacency(graph: &Graph) -> SparseMatrix {
    let n = graph.n();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|v| 1.0 / ((graph.degree(v) + 1) as f64).sqrt())
        .collect();
    let rows = (0..n)
        .map(|i| {
            let mut row: Vec<(usize, f64)> = graph
                .neighbors(i)
                .iter()
                .map(|&(j, _)| (j, inv_sqrt[i] * inv_sqrt[j]))
                .collect();
            row.push((i, inv_sqrt[i] * inv_sqrt[i]));
            row.sort_by_key(|&(j, _)| j);
            row
        })
        .collect();
    SparseMatrix::from_rows(rows)
}

/// `(i, j)` for every `j` in the closed neighborhood of `i`, grouped by `i`.
pub(crate) fn attention_pairs(graph: &Graph) -> (Vec<NodeId>, Vec<NodeId>) {
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    for i in 0..graph.n() {
        let mut nbrs: Vec<usize> = graph.neighbors(i).iter().map(|&(j, _)| j).collect();
        nbrs.push(i);
        nbrs.sort_unstable();
        for j in nbrs {
            rows.push(i);
            cols.push(j);
        }
    }
    (rows, cols)
}

/// Upper-triangle adjacency indicators of the graph padded to `n_max` nodes,
/// followed by a terminal indicator per padded node.
pub fn ff_encoding(graph: &Graph, terminals: &[NodeId], n_max: usize) -> Result<Vec<f64>> {
    let n = graph.n();
    if n > n_max {
        return Err(Error::Model(format!(
            "graph has {n} nodes but the feedforward model is sized for {n_max}"
        )));
    }
    let pairs = n_max * (n_max - 1) / 2;
    let mut x = vec![0.0; pairs + n_max];
    for e in graph.edges() {
        let (u, v) = (e.u, e.v);
        x[u * n_max - u * (u + 1) / 2 + (v - u - 1)] = 1.0;
    }
    for &t in terminals {
        x[pairs + t] = 1.0;
    }
    Ok(x)
}

struct Builder<'a> {
    tape: Tape<'a>,
    params: &'a ModelParams,
    vars: Vec<Var>,
    mode: Mode<'a>,
}

impl Builder<'_> {
    fn p(&self, name: &str) -> Var {
        let idx = self
            .params
            .tensors
            .iter()
            .position(|t| t.name == name)
            .unwrap_or_else(|| panic!("missing tensor {name}"));
        self.vars[idx]
    }

    fn dense(&mut self, x: Var, layer: &str) -> Var {
        let w = self.p(&format!("{layer}.w"));
        let b = self.p(&format!("{layer}.b"));
        let z = self.tape.matmul(x, w);
        self.tape.add_bias(z, b)
    }

    fn dropout(&mut self, x: Var) -> Var {
        let rate = self.params.hyper.dropout;
        let Mode::Train(rng) = &mut self.mode else {
            return x;
        };
        if rate <= 0.0 {
            return x;
        }
        let keep = 1.0 - rate;
        let len = self.tape.value(x).data.len();
        let mask = (0..len)
            .map(|_| {
                if rng.gen::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
            .collect();
        self.tape.mul_const(x, mask)
    }

    fn head(&mut self, h: Var) -> Var {
        let h = self.dense(h, "head1");
        let h = self.tape.relu(h);
        let h = self.dropout(h);
        let h = self.dense(h, "head2");
        let h = self.tape.relu(h);
        let h = self.dropout(h);
        self.dense(h, "out")
    }
}

/// `relu(H W_self + Â H W + b)`: the first-order filter with separate
/// weights for a node's own features and for the propagated ones.
pub(crate) fn gcn_step(
    tape: &mut Tape<'_>,
    a: &Arc<SparseMatrix>,
    h: Var,
    w_self: Option<Var>,
    w: Var,
    b: Var,
) -> Var {
    let z = tape.matmul(h, w);
    let mut z = tape.spmm(Arc::clone(a), z);
    if let Some(ws) = w_self {
        let own = tape.matmul(h, ws);
        z = tape.add(z, own);
    }
    let z = tape.add_bias(z, b);
    tape.relu(z)
}

/// Returns the layer output and the attention coefficients.
pub(crate) fn gat_step(
    tape: &mut Tape<'_>,
    pairs: &IndexPairs,
    n: usize,
    h: Var,
    [w, b, a_src, a_dst]: [Var; 4],
) -> (Var, Var) {
    let (rows, cols) = pairs;
    let wh = tape.matmul(h, w);
    let s_src = tape.matmul(wh, a_src);
    let s_dst = tape.matmul(wh, a_dst);
    let ei = tape.gather_rows(s_src, Arc::clone(rows));
    let ej = tape.gather_rows(s_dst, Arc::clone(cols));
    let e = tape.add(ei, ej);
    let e = tape.leaky_relu(e, LEAKY_SLOPE);
    let alpha = tape.segment_softmax(e, Arc::clone(rows));
    let msg = tape.gather_rows(wh, Arc::clone(cols));
    let msg = tape.row_scale(msg, alpha);
    let agg = tape.scatter_add_rows(msg, Arc::clone(rows), n);
    let z = tape.add_bias(agg, b);
    (tape.elu(z), alpha)
}

/// Runs the variant's forward pass. For the GNN, `gnn_iterations` pins the
/// number of diffusion steps instead of iterating to convergence.
pub fn forward<'a>(
    params: &'a ModelParams,
    ctx: &GraphContext,
    mode: Mode<'a>,
    gnn_iterations: Option<usize>,
) -> Result<Forward<'a>> {
    let mut tape = Tape::new();
    let vars = params
        .tensors
        .iter()
        .enumerate()
        .map(|(i, t)| tape.param(i, &t.value))
        .collect();
    let mut b = Builder {
        tape,
        params,
        vars,
        mode,
    };
    let mut iterations = None;
    let mut changes = Vec::new();
    let mut states = None;
    let logits = match params.variant {
        Variant::Ff => {
            let input = ctx
                .ff_input
                .clone()
                .ok_or_else(|| Error::Model("context lacks the feedforward encoding".into()))?;
            let x = b.tape.constant(input);
            let h = b.dense(x, "fc1");
            let h = b.tape.relu(h);
            let h = b.dense(h, "fc2");
            let h = b.tape.relu(h);
            let out = b.dense(h, "out");
            b.tape.row_prefix_to_column(out, ctx.n)
        }
        Variant::Gcn => {
            let a = ctx
                .adjacency
                .clone()
                .ok_or_else(|| Error::Model("context lacks the normalized adjacency".into()))?;
            let mut h = b.tape.constant(ctx.features.clone());
            for layer in ["conv1", "conv2"] {
                let ws = b.p(&format!("{layer}.self"));
                let (w, bias) = (b.p(&format!("{layer}.w")), b.p(&format!("{layer}.b")));
                h = gcn_step(&mut b.tape, &a, h, Some(ws), w, bias);
                h = b.dropout(h);
            }
            b.head(h)
        }
        Variant::Gat => {
            let pairs = ctx
                .attention_pairs
                .clone()
                .ok_or_else(|| Error::Model("context lacks attention pairs".into()))?;
            let mut h = b.tape.constant(ctx.features.clone());
            for layer in ["att1", "att2"] {
                let ps = ["w", "b", "src", "dst"].map(|s| b.p(&format!("{layer}.{s}")));
                h = gat_step(&mut b.tape, &pairs, ctx.n, h, ps).0;
                h = b.dropout(h);
            }
            b.head(h)
        }
        Variant::Gnn => {
            let edges = ctx
                .diffusion
                .as_ref()
                .ok_or_else(|| Error::Model("context lacks diffusion edges".into()))?;
            let s = params.hyper.state_dim;
            let (w1, b1) = (b.p("transition.w1"), b.p("transition.b1"));
            let (w2, b2) = (b.p("transition.w2"), b.p("transition.b2"));
            let lt = b.tape.constant(edges.target_features.clone());
            let le = b.tape.constant(edges.labels.clone());
            let ls = b.tape.constant(edges.source_features.clone());
            let mut x = b.tape.constant(Matrix::zeros(ctx.n, s));
            let limit = gnn_iterations.unwrap_or(params.hyper.gnn_max_iterations);
            let mut steps = 0;
            while steps < limit {
                let xv = b.tape.gather_rows(x, Arc::clone(&edges.source));
                let input = b.tape.concat_cols(&[lt, le, xv, ls]);
                let z = b.tape.matmul(input, w1);
                let z = b.tape.add_bias(z, b1);
                let hid = b.tape.tanh(z);
                let z = b.tape.matmul(hid, w2);
                let msg = b.tape.add_bias(z, b2);
                let next = b
                    .tape
                    .scatter_add_rows(msg, Arc::clone(&edges.target), ctx.n);
                steps += 1;
                let (old, new) = (b.tape.value(x), b.tape.value(next));
                if new.max_abs() > DIVERGENCE_LIMIT || !new.is_finite() {
                    return Err(Error::Divergence { iteration: steps });
                }
                let change = old
                    .data
                    .iter()
                    .zip(&new.data)
                    .fold(0.0f64, |m, (a, c)| m.max((a - c).abs()));
                changes.push(change);
                x = next;
                if gnn_iterations.is_none() && change < params.hyper.gnn_tolerance {
                    break;
                }
            }
            iterations = Some(steps);
            states = Some(b.tape.value(x).clone());
            let l = b.tape.constant(ctx.features.clone());
            let input = b.tape.concat_cols(&[x, l]);
            let (w1, b1) = (b.p("output.w1"), b.p("output.b1"));
            let (w2, b2) = (b.p("output.w2"), b.p("output.b2"));
            let z = b.tape.matmul(input, w1);
            let z = b.tape.add_bias(z, b1);
            let hid = b.tape.tanh(z);
            let z = b.tape.matmul(hid, w2);
            b.tape.add_bias(z, b2)
        }
    };
    Ok(Forward {
        tape: b.tape,
        logits,
        param_vars: b.vars,
        gnn_iterations: iterations,
        gnn_changes: changes,
        gnn_states: states,
    })
}

pub struct DiffusionOutput {
    pub scores: Vec<f64>,
    pub states: Matrix,
    pub iterations: usize,
    pub changes: Vec<f64>,
}

/// Runs the recurrent diffusion model and exposes its final node states.
pub fn gnn_diffusion(
    params: &ModelParams,
    ctx: &GraphContext,
    iterations: Option<usize>,
) -> Result<DiffusionOutput> {
    if params.variant != Variant::Gnn {
        return Err(Error::Model(format!(
            "expected a gnn model, got {}",
            params.variant
        )));
    }
    let fwd = forward(params, ctx, Mode::Eval, iterations)?;
    Ok(DiffusionOutput {
        scores: fwd.scores(),
        states: fwd
            .gnn_states
            .clone()
            .unwrap_or_else(|| Matrix::zeros(ctx.n, 0)),
        iterations: fwd.gnn_iterations.unwrap_or(0),
        changes: fwd.gnn_changes,
    })
}

/// One graph convolution `relu(H W_self + Â H W + b)` outside of any model;
/// without `w_self` it is the plain propagation `relu(Â H W + b)`.
pub fn gcn_layer(
    h: &Matrix,
    graph: &Graph,
    w_self: Option<&Matrix>,
    w: &Matrix,
    b: &Matrix,
) -> Matrix {
    let mut tape = Tape::new();
    let a = Arc::new(normalized_adjacency(graph));
    let hv = tape.constant(h.clone());
    let ws = w_self.map(|m| tape.constant(m.clone()));
    let (w, b) = (tape.constant(w.clone()), tape.constant(b.clone()));
    let out = gcn_step(&mut tape, &a, hv, ws, w, b);
    tape.value(out).clone()
}

pub struct AttentionOutput {
    pub output: Matrix,
    /// `(i, j)` pairs in the order of `alpha`.
    pub pairs: Vec<(NodeId, NodeId)>,
    pub alpha: Vec<f64>,
}

/// One attention layer `elu(sum_j alpha_ij W h_j + b)` outside of any model.
pub fn gat_attention(
    h: &Matrix,
    graph: &Graph,
    w: &Matrix,
    b: &Matrix,
    a_src: &Matrix,
    a_dst: &Matrix,
) -> AttentionOutput {
    let n = graph.n();
    let (rows, cols) = attention_pairs(graph);
    let pairs = rows.iter().copied().zip(cols.iter().copied()).collect();
    let index = (Arc::new(rows), Arc::new(cols));
    let mut tape = Tape::new();
    let hv = tape.constant(h.clone());
    let ps = [w, b, a_src, a_dst].map(|m| tape.constant(m.clone()));
    let (out, alpha) = gat_step(&mut tape, &index, n, hv, ps);
    AttentionOutput {
        output: tape.value(out).clone(),
        pairs,
        alpha: tape.value(alpha).data.clone(),
    }
}
