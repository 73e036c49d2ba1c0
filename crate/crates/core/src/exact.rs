//! Exact Steiner tree solvers.
//!
//! [`dreyfus_wagner`] is the production solver: a dynamic program over subsets
//! of terminals, `O(3^k n + 2^k m log n)`. [`brute_force_steiner`] enumerates
//! Steiner point sets and exists to cross-check it on small graphs.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::graph::{
    induced_subgraph, is_connected, minimum_spanning_tree, prune_nonterminal_leaves, Edge, NodeId,
    SteinerTree, StpInstance, Weight,
};

pub const DEFAULT_TERMINAL_CAP: usize = 14;
pub const BRUTE_FORCE_MAX_NODES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveStats {
    pub subsets: u64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactResult {
    pub tree: SteinerTree,
    pub optimal_cost: Weight,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, Copy)]
enum Back {
    None,
    Root,
    Split(u32),
    Edge(u32),
}

const INF: Weight = Weight::MAX / 4;

pub fn dreyfus_wagner(instance: &StpInstance) -> Result<ExactResult> {
    dreyfus_wagner_capped(instance, DEFAULT_TERMINAL_CAP)
}

pub fn dreyfus_wagner_capped(instance: &StpInstance, cap: usize) -> Result<ExactResult> {
    let started = Instant::now();
    let terminals = instance.terminals();
    let k = terminals.len();
    if k > cap {
        return Err(Error::TerminalCapExceeded { terminals: k, cap });
    }
    let graph = instance.graph();
    let n = graph.n();
    // The last terminal is the root; subsets range over the others.
    let root = terminals[k - 1];
    let others = &terminals[..k - 1];
    let full = (1usize << others.len()) - 1;
    let mut cost = vec![INF; (full + 1) * n];
    let mut back = vec![Back::None; (full + 1) * n];
    let at = |mask: usize, v: usize| mask * n + v;

    for mask in 1..=full {
        if mask.is_power_of_two() {
            let t = others[mask.trailing_zeros() as usize];
            cost[at(mask, t)] = 0;
            back[at(mask, t)] = Back::Root;
        } else {
            let low = mask & mask.wrapping_neg();
            for v in 0..n {
                let mut best = INF;
                let mut best_sub = 0;
                // Submasks containing the lowest bit, each unordered split once.
                let rest = mask ^ low;
                let mut s = rest;
                loop {
                    let sub = s | low;
                    if sub != mask {
                        let c = cost[at(sub, v)] + cost[at(mask ^ sub, v)];
                        if c < best {
                            best = c;
                            best_sub = sub;
                        }
                    }
                    if s == 0 {
                        break;
                    }
                    s = (s - 1) & rest;
                }
                if best < INF {
                    cost[at(mask, v)] = best;
                    back[at(mask, v)] = Back::Split(best_sub as u32);
                }
            }
        }
        // Grow every partial tree along shortest paths.
        let mut heap: BinaryHeap<Reverse<(Weight, usize)>> = (0..n)
            .filter(|&v| cost[at(mask, v)] < INF)
            .map(|v| Reverse((cost[at(mask, v)], v)))
            .collect();
        let mut done = vec![false; n];
        while let Some(Reverse((d, u))) = heap.pop() {
            if done[u] || d > cost[at(mask, u)] {
                continue;
            }
            done[u] = true;
            for &(v, w) in graph.neighbors(u) {
                let c = d + w;
                if c < cost[at(mask, v)] {
                    cost[at(mask, v)] = c;
                    back[at(mask, v)] = Back::Edge(u as u32);
                    heap.push(Reverse((c, v)));
                }
            }
        }
    }

    let optimal_cost = cost[at(full, root)];
    if optimal_cost >= INF {
        return Err(Error::Disconnected { node: root });
    }
    let mut edges = Vec::new();
    let mut stack = vec![(full, root)];
    while let Some((mask, v)) = stack.pop() {
        match back[at(mask, v)] {
            Back::Root => {}
            Back::Split(sub) => {
                let sub = sub as usize;
                stack.push((sub, v));
                stack.push((mask ^ sub, v));
            }
            Back::Edge(u) => {
                let u = u as usize;
                edges.push(Edge::new(u, v, graph.weight(u, v).expect("edge exists")));
                stack.push((mask, u));
            }
            Back::None => unreachable!("finite cost without a back pointer"),
        }
    }
    let tree = SteinerTree::from_edges(edges);
    debug_assert_eq!(tree.cost(), optimal_cost);
    debug_assert!(tree.is_tree() && tree.spans(terminals));
    Ok(ExactResult {
        tree,
        optimal_cost,
        stats: SolveStats {
            subsets: full as u64,
            elapsed: started.elapsed(),
        },
    })
}

/// Tries every set of Steiner points. Limited to [`BRUTE_FORCE_MAX_NODES`] nodes.
pub fn brute_force_steiner(instance: &StpInstance) -> Result<ExactResult> {
    let started = Instant::now();
    let graph = instance.graph();
    let n = graph.n();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(Error::TooLarge {
            n,
            max: BRUTE_FORCE_MAX_NODES,
        });
    }
    let terminals = instance.terminals();
    let optional: Vec<NodeId> = (0..n).filter(|&v| !instance.is_terminal(v)).collect();
    let mut best: Option<SteinerTree> = None;
    let mut tried = 0u64;
    for mask in 0u32..(1 << optional.len()) {
        let mut nodes = terminals.to_vec();
        nodes.extend(
            optional
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &v)| v),
        );
        if !is_connected(graph, Some(&nodes)) {
            continue;
        }
        tried += 1;
        let sub = induced_subgraph(graph, &nodes)?;
        let mst = minimum_spanning_tree(&sub.graph)?;
        let tree = SteinerTree::from_edges(mst.edges().iter().map(|&e| sub.to_original(e)));
        let tree = prune_nonterminal_leaves(&tree, terminals)?;
        if best.as_ref().is_none_or(|b| tree.cost() < b.cost()) {
            best = Some(tree);
        }
    }
    let tree = best.ok_or(Error::Disconnected { node: terminals[0] })?;
    Ok(ExactResult {
        optimal_cost: tree.cost(),
        tree,
        stats: SolveStats {
            subsets: tried,
            elapsed: started.elapsed(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verification {
    pub valid: bool,
    /// Recomputed from the instance; `None` when invalid.
    pub cost: Option<Weight>,
}

/// Checks `tree` against `instance` without trusting the tree's stored weights.
pub fn verify_steiner_tree(instance: &StpInstance, tree: &SteinerTree) -> Verification {
    let invalid = Verification {
        valid: false,
        cost: None,
    };
    let graph = instance.graph();
    let mut cost: Weight = 0;
    for e in tree.edges() {
        if e.u >= graph.n() || e.v >= graph.n() {
            return invalid;
        }
        match graph.weight(e.u, e.v) {
            Some(w) if w == e.w => cost += w,
            _ => return invalid,
        }
    }
    if !tree.is_tree() || !tree.spans(instance.terminals()) {
        return invalid;
    }
    Verification {
        valid: true,
        cost: Some(cost),
    }
}
