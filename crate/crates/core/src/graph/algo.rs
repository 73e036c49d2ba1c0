use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use super::{Edge, Graph, NodeId, SteinerTree, Weight};
use crate::error::{Error, Result};
use crate::exec::Execution;

pub(crate) const UNREACHABLE: Weight = Weight::MAX;

#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShortestPaths {
    pub source: NodeId,
    pub dist: Vec<Weight>,
    /// Predecessor on a shortest path; among equally short predecessors the
    /// smallest id wins.
    pub pred: Vec<Option<NodeId>>,
}

impl ShortestPaths {
    /// Node sequence from the source to `target`, both inclusive.
    pub fn path_to(&self, target: NodeId) -> Option<Vec<NodeId>> {
        if self.dist[target] == UNREACHABLE {
            return None;
        }
        let mut path = vec![target];
        let mut cur = target;
        while let Some(p) = self.pred[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Some(path)
    }
}

/// Label-setting search. Unreachable nodes keep distance `UNREACHABLE`.
pub(crate) fn dijkstra(graph: &Graph, source: NodeId) -> ShortestPaths {
    let n = graph.n();
    let mut dist = vec![UNREACHABLE; n];
    let mut pred: Vec<Option<NodeId>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0;
    heap.push(Reverse((0, source)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(v, w) in graph.neighbors(u) {
            if done[v] {
                continue;
            }
            let cand = d + w;
            if cand < dist[v] {
                dist[v] = cand;
                pred[v] = Some(u);
                heap.push(Reverse((cand, v)));
            } else if cand == dist[v] && pred[v].is_some_and(|p| u < p) {
                pred[v] = Some(u);
            }
        }
    }
    ShortestPaths { source, dist, pred }
}

pub fn shortest_paths(graph: &Graph, source: NodeId) -> Result<ShortestPaths> {
    if source >= graph.n() {
        return Err(Error::InvalidGraph(format!("source {source} out of range")));
    }
    let sp = dijkstra(graph, source);
    if let Some(node) = sp.dist.iter().position(|&d| d == UNREACHABLE) {
        return Err(Error::Disconnected { node });
    }
    Ok(sp)
}

/// Symmetric `n x n` table of shortest-path lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<Weight>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, u: NodeId, v: NodeId) -> Weight {
        self.data[u * self.n + v]
    }

    pub fn row(&self, u: NodeId) -> &[Weight] {
        &self.data[u * self.n..(u + 1) * self.n]
    }

    pub fn max(&self) -> Weight {
        self.data.iter().copied().max().unwrap_or(0)
    }
}

pub fn all_pairs_shortest_paths(graph: &Graph) -> Result<DistanceMatrix> {
    all_pairs_shortest_paths_with(graph, Execution::Sequential)
}

/// One single-source search per node.
pub fn all_pairs_shortest_paths_with(graph: &Graph, exec: Execution) -> Result<DistanceMatrix> {
    let n = graph.n();
    let rows = exec.map_range(n, |s| dijkstra(graph, s).dist);
    let mut data = Vec::with_capacity(n * n);
    for row in rows {
        if let Some(node) = row.iter().position(|&d| d == UNREACHABLE) {
            return Err(Error::Disconnected { node });
        }
        data.extend(row);
    }
    Ok(DistanceMatrix { n, data })
}

/// Kruskal over the given edges; returns a minimum spanning forest.
pub fn spanning_forest(n: usize, edges: &[Edge]) -> Vec<Edge> {
    let mut sorted: Vec<Edge> = edges.to_vec();
    sorted.sort_unstable_by_key(Edge::mst_key);
    let mut uf = UnionFind::new(n);
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    for e in sorted {
        if uf.union(e.u, e.v) {
            out.push(e);
            if out.len() + 1 == n {
                break;
            }
        }
    }
    out
}

pub fn minimum_spanning_tree(graph: &Graph) -> Result<SteinerTree> {
    let forest = spanning_forest(graph.n(), graph.edges());
    if forest.len() + 1 != graph.n() {
        let mut uf = UnionFind::new(graph.n());
        for e in &forest {
            uf.union(e.u, e.v);
        }
        let root = uf.find(0);
        let node = (0..graph.n()).find(|&v| uf.find(v) != root).unwrap_or(0);
        return Err(Error::Disconnected { node });
    }
    Ok(SteinerTree::from_edges(forest))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InducedSubgraph {
    pub graph: Graph,
    /// `mapping[new] = old`.
    pub mapping: Vec<NodeId>,
}

impl InducedSubgraph {
    pub fn to_original(&self, e: Edge) -> Edge {
        Edge::new(self.mapping[e.u], self.mapping[e.v], e.w)
    }
}

pub fn induced_subgraph(graph: &Graph, nodes: &[NodeId]) -> Result<InducedSubgraph> {
    let mut mapping = nodes.to_vec();
    mapping.sort_unstable();
    mapping.dedup();
    if mapping.is_empty() {
        return Err(Error::EmptyNodeSet);
    }
    if let Some(&bad) = mapping.iter().find(|&&v| v >= graph.n()) {
        return Err(Error::InvalidGraph(format!("node {bad} out of range")));
    }
    let mut index = vec![usize::MAX; graph.n()];
    for (i, &v) in mapping.iter().enumerate() {
        index[v] = i;
    }
    let edges = graph
        .edges()
        .iter()
        .filter(|e| index[e.u] != usize::MAX && index[e.v] != usize::MAX)
        .map(|e| (index[e.u], index[e.v], e.w));
    let sub = Graph::with_denominator(mapping.len(), edges, graph.denominator())?;
    Ok(InducedSubgraph {
        graph: sub,
        mapping,
    })
}

/// Connectivity of the whole graph, or of the subgraph induced by `nodes`.
pub fn is_connected(graph: &Graph, nodes: Option<&[NodeId]>) -> bool {
    let n = graph.n();
    let mut member = vec![nodes.is_none(); n];
    let start = match nodes {
        None => 0,
        Some(set) => {
            for &v in set {
                member[v] = true;
            }
            match set.first() {
                Some(&v) => v,
                None => return false,
            }
        }
    };
    let target = member.iter().filter(|&&m| m).count();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut reached = 1;
    while let Some(u) = queue.pop_front() {
        for &(v, _) in graph.neighbors(u) {
            if member[v] && !seen[v] {
                seen[v] = true;
                reached += 1;
                queue.push_back(v);
            }
        }
    }
    reached == target
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphStats {
    pub density: f64,
    /// Minimum hop eccentricity.
    pub radius: usize,
}

fn hop_eccentricity(graph: &Graph, source: NodeId) -> Option<usize> {
    let mut hops = vec![usize::MAX; graph.n()];
    hops[source] = 0;
    let mut queue = VecDeque::from([source]);
    let mut ecc = 0;
    let mut reached = 1;
    while let Some(u) = queue.pop_front() {
        ecc = hops[u];
        for &(v, _) in graph.neighbors(u) {
            if hops[v] == usize::MAX {
                hops[v] = hops[u] + 1;
                reached += 1;
                queue.push_back(v);
            }
        }
    }
    (reached == graph.n()).then_some(ecc)
}

pub fn graph_stats(graph: &Graph) -> Result<GraphStats> {
    let n = graph.n();
    if n < 2 {
        return Err(Error::InvalidGraph("stats need at least 2 nodes".into()));
    }
    let mut radius = usize::MAX;
    for s in 0..n {
        match hop_eccentricity(graph, s) {
            Some(e) => radius = radius.min(e),
            None => return Err(Error::Disconnected { node: s }),
        }
    }
    let density = 2.0 * graph.m() as f64 / (n as f64 * (n as f64 - 1.0));
    Ok(GraphStats { density, radius })
}
