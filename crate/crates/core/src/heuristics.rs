//! Turning per-node scores into Steiner trees.
//!
//! Nodes scoring at least [`PREDICTION_THRESHOLD`] are the model's predicted
//! solution nodes and seed both constructions together with the terminals.
//! Terminal scores are always read as 1.

use crate::approx::{two_approx, two_approx_on};
use crate::error::{Error, Result};
use crate::graph::{
    induced_subgraph, prune_nonterminal_leaves, spanning_forest, Graph, NodeId, SteinerTree,
    StpInstance, UnionFind,
};

pub const PREDICTION_THRESHOLD: f64 = 0.5;

/// Working node set whose induced connectivity is tracked incrementally.
struct Growing<'a> {
    graph: &'a Graph,
    member: Vec<bool>,
    uf: UnionFind,
    components: usize,
}

impl<'a> Growing<'a> {
    fn new(graph: &'a Graph) -> Self {
        Growing {
            graph,
            member: vec![false; graph.n()],
            uf: UnionFind::new(graph.n()),
            components: 0,
        }
    }

    fn insert(&mut self, v: NodeId) {
        if self.member[v] {
            return;
        }
        self.member[v] = true;
        self.components += 1;
        for &(u, _) in self.graph.neighbors(v) {
            if self.member[u] && self.uf.union(u, v) {
                self.components -= 1;
            }
        }
    }

    fn connected(&self) -> bool {
        self.components == 1
    }

    fn nodes(&self) -> Vec<NodeId> {
        (0..self.member.len()).filter(|&v| self.member[v]).collect()
    }
}

/// Scores with terminals forced to 1; rejects wrong lengths and NaN.
fn effective_scores(instance: &StpInstance, scores: &[f64]) -> Result<Vec<f64>> {
    if scores.len() != instance.n() {
        return Err(Error::InvalidInstance(format!(
            "{} scores for {} nodes",
            scores.len(),
            instance.n()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInstance("score vector contains NaN".into()));
    }
    let mut s = scores.to_vec();
    for &t in instance.terminals() {
        s[t] = 1.0;
    }
    Ok(s)
}

/// Seeds the working set and returns the remaining nodes by decreasing
/// score, ties to the lower id.
fn seed_and_rank<'a>(graph: &'a Graph, scores: &[f64]) -> (Growing<'a>, Vec<NodeId>) {
    let mut set = Growing::new(graph);
    let mut rest = Vec::new();
    for (v, &s) in scores.iter().enumerate() {
        if s >= PREDICTION_THRESHOLD {
            set.insert(v);
        } else {
            rest.push(v);
        }
    }
    rest.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    (set, rest)
}

/// H1: grow the predicted node set by score until it induces a connected
/// subgraph, then take that subgraph's MST and prune.
pub fn h1_induced_mst(instance: &StpInstance, scores: &[f64]) -> Result<SteinerTree> {
    let s = effective_scores(instance, scores)?;
    let graph = instance.graph();
    let (mut set, rest) = seed_and_rank(graph, &s);
    let mut next = rest.into_iter();
    while !set.connected() {
        match next.next() {
            Some(v) => set.insert(v),
            None => {
                return Err(Error::Disconnected {
                    node: instance.terminals()[0],
                })
            }
        }
    }
    let sub = induced_subgraph(graph, &set.nodes())?;
    let mst = spanning_forest(sub.graph.n(), sub.graph.edges());
    let tree = SteinerTree::from_edges(mst.into_iter().map(|e| sub.to_original(e)));
    prune_nonterminal_leaves(&tree, instance.terminals())
}

/// H2: treat the predicted nodes as extra terminals for the 2-approximation,
/// promoting further nodes by score until the working set induces a connected
/// subgraph. Every candidate is pruned back to the original terminals and the
/// cheapest one wins, the plain 2-approximation included.
pub fn h2_terminal_promotion(instance: &StpInstance, scores: &[f64]) -> Result<SteinerTree> {
    let s = effective_scores(instance, scores)?;
    let graph = instance.graph();
    let terminals = instance.terminals();
    let mut best = two_approx(instance)?;
    let (mut set, rest) = seed_and_rank(graph, &s);
    let mut next = rest.into_iter();
    loop {
        let working = set.nodes();
        if working.len() > terminals.len() {
            let tree = two_approx_on(graph, &working)?;
            let tree = prune_nonterminal_leaves(&tree, terminals)?;
            if tree.cost() < best.cost() {
                best = tree;
            }
        }
        if set.connected() {
            return Ok(best);
        }
        match next.next() {
            Some(v) => set.insert(v),
            None => return Ok(best),
        }
    }
}
