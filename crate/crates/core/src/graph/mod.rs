//! Weighted undirected graphs, Steiner instances and trees.
//!
//! Weights are positive integers. A graph may declare a denominator so that
//! decimal weights read from external files stay exact: the real weight of an
//! edge is `w / denominator`. All costs are compared in scaled units.

mod algo;
mod tree;

pub use algo::{
    all_pairs_shortest_paths, all_pairs_shortest_paths_with, graph_stats, induced_subgraph,
    is_connected, minimum_spanning_tree, shortest_paths, spanning_forest, DistanceMatrix,
    GraphStats, InducedSubgraph, ShortestPaths, UnionFind,
};
pub use tree::{prune_nonterminal_leaves, SteinerTree};

use crate::error::{Error, Result};

pub type NodeId = usize;
/// Scaled integer weight.
pub type Weight = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub w: Weight,
}

impl Edge {
    /// Normalized so that `u < v`.
    pub fn new(a: NodeId, b: NodeId, w: Weight) -> Self {
        Edge {
            u: a.min(b),
            v: a.max(b),
            w,
        }
    }

    /// Kruskal order: weight first, then endpoints.
    pub fn mst_key(&self) -> (Weight, NodeId, NodeId) {
        (self.w, self.u, self.v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(NodeId, Weight)>>,
    denominator: u64,
}

impl Graph {
    pub fn new<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId, Weight)>,
    {
        Self::with_denominator(n, edges, 1)
    }

    /// Builds a graph whose edges are sorted by `(u, v)` with `u < v`.
    pub fn with_denominator<I>(n: usize, edges: I, denominator: u64) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId, Weight)>,
    {
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no nodes".into()));
        }
        if denominator == 0 {
            return Err(Error::InvalidGraph("weight denominator is zero".into()));
        }
        let mut list = Vec::new();
        for (a, b, w) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) out of range for {n} nodes"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at node {a}")));
            }
            if w == 0 {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) has zero weight"
                )));
            }
            list.push(Edge::new(a, b, w));
        }
        list.sort_unstable();
        for pair in list.windows(2) {
            if pair[0].u == pair[1].u && pair[0].v == pair[1].v {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge ({}, {})",
                    pair[0].u, pair[0].v
                )));
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for e in &list {
            adjacency[e.u].push((e.v, e.w));
            adjacency[e.v].push((e.u, e.w));
        }
        for row in &mut adjacency {
            row.sort_unstable();
        }
        Ok(Graph {
            n,
            edges: list,
            adjacency,
            denominator,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbors of `u` sorted by id, with edge weights.
    pub fn neighbors(&self, u: NodeId) -> &[(NodeId, Weight)] {
        &self.adjacency[u]
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.adjacency[u].len()
    }

    pub fn weight(&self, u: NodeId, v: NodeId) -> Option<Weight> {
        let row = self.adjacency.get(u)?;
        row.binary_search_by_key(&v, |&(x, _)| x)
            .ok()
            .map(|i| row[i].1)
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.weight(u, v).is_some()
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn max_weight(&self) -> Weight {
        self.edges.iter().map(|e| e.w).max().unwrap_or(0)
    }

    /// True when every edge has the same weight.
    pub fn is_uniform(&self) -> bool {
        self.edges.windows(2).all(|p| p[0].w == p[1].w)
    }

    /// Real value of a scaled weight or cost.
    pub fn real(&self, w: Weight) -> f64 {
        w as f64 / self.denominator as f64
    }

    /// Same topology with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> Result<Graph> {
        Graph::with_denominator(
            self.n,
            self.edges.iter().map(|e| (e.u, e.v, e.w * factor)),
            self.denominator,
        )
    }

    /// Relabels node `v` as `perm[v]`.
    pub fn permuted(&self, perm: &[NodeId]) -> Result<Graph> {
        if perm.len() != self.n {
            return Err(Error::InvalidGraph("permutation length mismatch".into()));
        }
        Graph::with_denominator(
            self.n,
            self.edges.iter().map(|e| (perm[e.u], perm[e.v], e.w)),
            self.denominator,
        )
    }
}

/// A Steiner tree problem instance: a connected graph plus at least two terminals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StpInstance {
    graph: Graph,
    terminals: Vec<NodeId>,
    terminal_mask: Vec<bool>,
    pub id: String,
    pub seed: Option<u64>,
}

impl StpInstance {
    pub fn new(graph: Graph, terminals: Vec<NodeId>, id: impl Into<String>) -> Result<Self> {
        let n = graph.n();
        let mut terminals = terminals;
        terminals.sort_unstable();
        terminals.dedup();
        if let Some(&t) = terminals.iter().find(|&&t| t >= n) {
            return Err(Error::InvalidInstance(format!(
                "terminal {t} out of range for {n} nodes"
            )));
        }
        if terminals.len() < 2 {
            return Err(Error::InvalidInstance(format!(
                "need at least 2 terminals, got {}",
                terminals.len()
            )));
        }
        if !is_connected(&graph, None) {
            return Err(Error::InvalidInstance("graph is not connected".into()));
        }
        let mut terminal_mask = vec![false; n];
        for &t in &terminals {
            terminal_mask[t] = true;
        }
        Ok(StpInstance {
            graph,
            terminals,
            terminal_mask,
            id: id.into(),
            seed: None,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Sorted, deduplicated terminal ids.
    pub fn terminals(&self) -> &[NodeId] {
        &self.terminals
    }

    pub fn is_terminal(&self, v: NodeId) -> bool {
        self.terminal_mask[v]
    }

    /// Same instance with a different terminal set.
    pub fn with_terminals(&self, terminals: Vec<NodeId>) -> Result<Self> {
        let mut out = StpInstance::new(self.graph.clone(), terminals, self.id.clone())?;
        out.seed = self.seed;
        Ok(out)
    }

    pub fn permuted(&self, perm: &[NodeId]) -> Result<Self> {
        let graph = self.graph.permuted(perm)?;
        let terminals = self.terminals.iter().map(|&t| perm[t]).collect();
        let mut out = StpInstance::new(graph, terminals, self.id.clone())?;
        out.seed = self.seed;
        Ok(out)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub const A: NodeId = 0;
    pub const B: NodeId = 1;
    pub const C: NodeId = 2;
    pub const D: NodeId = 3;

    /// K4 with a heavy terminal triangle and a cheap hub `D`.
    pub fn star_fixture() -> StpInstance {
        let g = Graph::new(
            4,
            [
                (A, B, 5),
                (A, C, 5),
                (B, C, 5),
                (A, D, 3),
                (B, D, 3),
                (C, D, 3),
            ],
        )
        .unwrap();
        StpInstance::new(g, vec![A, B, C], "fixture").unwrap()
    }

    pub fn triangle(w: [Weight; 3]) -> Graph {
        Graph::new(3, [(0, 1, w[0]), (1, 2, w[1]), (0, 2, w[2])]).unwrap()
    }

    pub fn path(weights: &[Weight]) -> Graph {
        Graph::new(
            weights.len() + 1,
            weights.iter().enumerate().map(|(i, &w)| (i, i + 1, w)),
        )
        .unwrap()
    }

    pub fn star(leaves: usize) -> Graph {
        Graph::new(leaves + 1, (1..=leaves).map(|l| (0, l, 1))).unwrap()
    }

    pub fn complete(n: usize) -> Graph {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v, 1));
            }
        }
        Graph::new(n, edges).unwrap()
    }
}
