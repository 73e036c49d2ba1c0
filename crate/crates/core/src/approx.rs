//! Metric-closure 2-approximation (Kou, Markowsky and Berman).

use crate::error::{Error, Result};
use crate::graph::{
    prune_nonterminal_leaves, spanning_forest, Edge, Graph, NodeId, SteinerTree, StpInstance,
    Weight,
};

/// Complete graph on the terminals weighted by shortest-path distance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricClosure {
    pub terminals: Vec<NodeId>,
    /// `dist[i][j]` between `terminals[i]` and `terminals[j]`.
    pub dist: Vec<Vec<Weight>>,
    /// `paths[i][j]`: node sequence from `terminals[i]` to `terminals[j]`.
    pub paths: Vec<Vec<Vec<NodeId>>>,
}

impl MetricClosure {
    pub fn len(&self) -> usize {
        self.terminals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terminals.is_empty()
    }

    /// Closure edges `(i, j, d)` over terminal indices, `i < j`.
    pub fn edges(&self) -> Vec<Edge> {
        let k = self.len();
        let mut out = Vec::with_capacity(k * k.saturating_sub(1) / 2);
        for i in 0..k {
            for j in i + 1..k {
                out.push(Edge::new(i, j, self.dist[i][j]));
            }
        }
        out
    }
}

pub fn metric_closure(instance: &StpInstance) -> Result<MetricClosure> {
    closure_on(instance.graph(), instance.terminals())
}

pub(crate) fn closure_on(graph: &Graph, terminals: &[NodeId]) -> Result<MetricClosure> {
    let k = terminals.len();
    let mut dist = vec![vec![0; k]; k];
    let mut paths = vec![vec![Vec::new(); k]; k];
    for (i, &s) in terminals.iter().enumerate() {
        let sp = crate::graph::shortest_paths(graph, s)?;
        for (j, &t) in terminals.iter().enumerate() {
            dist[i][j] = sp.dist[t];
            paths[i][j] = sp.path_to(t).ok_or(Error::Disconnected { node: t })?;
        }
    }
    Ok(MetricClosure {
        terminals: terminals.to_vec(),
        dist,
        paths,
    })
}

pub fn two_approx(instance: &StpInstance) -> Result<SteinerTree> {
    two_approx_on(instance.graph(), instance.terminals())
}

/// Closure MST, expanded to base-graph paths, re-spanned and pruned.
pub(crate) fn two_approx_on(graph: &Graph, terminals: &[NodeId]) -> Result<SteinerTree> {
    let closure = closure_on(graph, terminals)?;
    let closure_mst = spanning_forest(closure.len(), &closure.edges());
    let mut union: Vec<Edge> = Vec::new();
    for e in &closure_mst {
        // Expand from the smaller terminal index so the path is canonical.
        let path = &closure.paths[e.u][e.v];
        for pair in path.windows(2) {
            let w = graph.weight(pair[0], pair[1]).expect("path edge exists");
            union.push(Edge::new(pair[0], pair[1], w));
        }
    }
    union.sort_unstable();
    union.dedup();
    let spanning = SteinerTree::from_edges(spanning_forest(graph.n(), &union));
    prune_nonterminal_leaves(&spanning, terminals)
}
