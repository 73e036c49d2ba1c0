use std::sync::Arc;

use super::arch::{attention_pairs, ff_encoding, normalized_adjacency};
use super::tensor::{Matrix, SparseMatrix};
use super::{ModelParams, Variant};
use crate::error::Result;
use crate::features::{node_features, FEATURE_WIDTH};
use crate::graph::StpInstance;

/// Directed edge lists for the diffusion model; each undirected edge appears
/// in both directions.
#[derive(Debug, Clone)]
pub struct DiffusionEdges {
    /// Receiving node `n` of the term `d_w(l_n, l_(n,v), x_v, l_v)`.
    pub target: Arc<Vec<usize>>,
    /// Sending node `v`.
    pub source: Arc<Vec<usize>>,
    /// Edge weight divided by the largest weight, one row per directed edge.
    pub labels: Matrix,
    pub target_features: Matrix,
    pub source_features: Matrix,
}

/// Shared `(rows, cols)` index lists.
pub type IndexPairs = (Arc<Vec<usize>>, Arc<Vec<usize>>);

/// Everything a forward pass needs from one instance, computed once.
#[derive(Debug, Clone)]
pub struct GraphContext {
    pub n: usize,
    pub features: Matrix,
    pub adjacency: Option<Arc<SparseMatrix>>,
    /// Attention pairs `(i, j)` for `j` in the closed neighborhood of `i`.
    pub attention_pairs: Option<IndexPairs>,
    pub diffusion: Option<DiffusionEdges>,
    pub ff_input: Option<Matrix>,
}

impl GraphContext {
    pub fn build(instance: &StpInstance, params: &ModelParams) -> Result<Self> {
        let graph = instance.graph();
        let n = graph.n();
        let mut ctx = GraphContext {
            n,
            features: Matrix::zeros(n, FEATURE_WIDTH),
            adjacency: None,
            attention_pairs: None,
            diffusion: None,
            ff_input: None,
        };
        if params.variant == Variant::Ff {
            let enc = ff_encoding(graph, instance.terminals(), params.hyper.n_max)?;
            ctx.ff_input = Some(Matrix::from_vec(1, enc.len(), enc));
            return Ok(ctx);
        }
        let f = node_features(instance)?;
        ctx.features = Matrix::from_vec(n, FEATURE_WIDTH, f.data);
        match params.variant {
            Variant::Gcn => ctx.adjacency = Some(Arc::new(normalized_adjacency(graph))),
            Variant::Gat => {
                let (rows, cols) = attention_pairs(graph);
                ctx.attention_pairs = Some((Arc::new(rows), Arc::new(cols)));
            }
            Variant::Gnn => {
                let max_w = graph.max_weight().max(1) as f64;
                let mut target = Vec::new();
                let mut source = Vec::new();
                let mut labels = Vec::new();
                for u in 0..n {
                    for &(v, w) in graph.neighbors(u) {
                        target.push(u);
                        source.push(v);
                        labels.push(w as f64 / max_w);
                    }
                }
                let gather = |idx: &[usize]| {
                    let mut m = Matrix::zeros(idx.len(), FEATURE_WIDTH);
                    for (k, &i) in idx.iter().enumerate() {
                        m.row_mut(k).copy_from_slice(ctx.features.row(i));
                    }
                    m
                };
                let target_features = gather(&target);
                let source_features = gather(&source);
                ctx.diffusion = Some(DiffusionEdges {
                    target: Arc::new(target),
                    source: Arc::new(source),
                    labels: Matrix::column(labels),
                    target_features,
                    source_features,
                });
            }
            Variant::Ff => unreachable!(),
        }
        Ok(ctx)
    }
}
