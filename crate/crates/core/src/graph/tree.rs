use std::collections::BTreeSet;

use super::{Edge, NodeId, UnionFind, Weight};
use crate::error::{Error, Result};

/// An edge set with its total weight. Edges are kept sorted and normalized.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SteinerTree {
    edges: Vec<Edge>,
    cost: Weight,
}

impl SteinerTree {
    pub fn from_edges(edges: impl IntoIterator<Item = Edge>) -> Self {
        let mut edges: Vec<Edge> = edges
            .into_iter()
            .map(|e| Edge::new(e.u, e.v, e.w))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        let cost = edges.iter().map(|e| e.w).sum();
        SteinerTree { edges, cost }
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_pairs(&self) -> Vec<(NodeId, NodeId)> {
        self.edges.iter().map(|e| (e.u, e.v)).collect()
    }

    pub fn cost(&self) -> Weight {
        self.cost
    }

    /// Endpoint set, sorted.
    pub fn nodes(&self) -> Vec<NodeId> {
        let set: BTreeSet<NodeId> = self.edges.iter().flat_map(|e| [e.u, e.v]).collect();
        set.into_iter().collect()
    }

    /// Acyclic and connected on its endpoint set.
    pub fn is_tree(&self) -> bool {
        let nodes = self.nodes();
        if nodes.is_empty() {
            return true;
        }
        if self.edges.len() + 1 != nodes.len() {
            return false;
        }
        let index = |v: NodeId| nodes.binary_search(&v).unwrap();
        let mut uf = UnionFind::new(nodes.len());
        self.edges.iter().all(|e| uf.union(index(e.u), index(e.v)))
    }

    pub fn spans(&self, terminals: &[NodeId]) -> bool {
        let nodes = self.nodes();
        terminals.iter().all(|t| nodes.binary_search(t).is_ok())
    }
}

/// Repeatedly drops degree-1 nodes that are not terminals.
pub fn prune_nonterminal_leaves(tree: &SteinerTree, terminals: &[NodeId]) -> Result<SteinerTree> {
    if !tree.is_tree() {
        return Err(Error::NotATree(
            "edge set has a cycle or is disconnected".into(),
        ));
    }
    if !tree.spans(terminals) {
        return Err(Error::NotATree("tree does not cover every terminal".into()));
    }
    let max_id = tree.edges.iter().map(|e| e.v).max().unwrap_or(0);
    let mut keep = vec![false; max_id + 1];
    for &t in terminals {
        if t <= max_id {
            keep[t] = true;
        }
    }
    let mut degree = vec![0usize; max_id + 1];
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); max_id + 1];
    for (i, e) in tree.edges.iter().enumerate() {
        degree[e.u] += 1;
        degree[e.v] += 1;
        incident[e.u].push(i);
        incident[e.v].push(i);
    }
    let mut alive = vec![true; tree.edges.len()];
    let mut stack: Vec<NodeId> = (0..=max_id)
        .filter(|&v| degree[v] == 1 && !keep[v])
        .collect();
    while let Some(leaf) = stack.pop() {
        if degree[leaf] != 1 {
            continue;
        }
        let Some(&ei) = incident[leaf].iter().find(|&&i| alive[i]) else {
            continue;
        };
        alive[ei] = false;
        let e = tree.edges[ei];
        let other = if e.u == leaf { e.v } else { e.u };
        degree[leaf] = 0;
        degree[other] -= 1;
        if degree[other] == 1 && !keep[other] {
            stack.push(other);
        }
    }
    Ok(SteinerTree::from_edges(
        tree.edges
            .iter()
            .zip(alive)
            .filter(|(_, a)| *a)
            .map(|(e, _)| *e),
    ))
}
