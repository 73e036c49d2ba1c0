//! Per-node feature rows shared by the message-passing scorers.
//!
//! Columns, in order: terminal flag, degree / (n - 1), weighted clustering
//! coefficient, distance to the nearest terminal and mean distance to all
//! terminals (both divided by the weighted diameter).

use crate::graph::{all_pairs_shortest_paths, Graph, StpInstance};
use crate::Result;

pub const FEATURE_SCHEMA: &str = "stp-node-features/v1";
pub const FEATURE_WIDTH: usize = 5;
pub const COLUMNS: [&str; FEATURE_WIDTH] = [
    "terminal",
    "degree",
    "clustering",
    "nearest_terminal_distance",
    "mean_terminal_distance",
];

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    /// Row-major `n x FEATURE_WIDTH`.
    pub data: Vec<f64>,
    pub n: usize,
    /// Divisor applied to the degree column.
    pub degree_scale: f64,
    /// Divisor applied to both distance columns, in real weight units.
    pub distance_scale: f64,
}

impl FeatureMatrix {
    pub fn width(&self) -> usize {
        FEATURE_WIDTH
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.data[v * FEATURE_WIDTH..(v + 1) * FEATURE_WIDTH]
    }
}

/// Per-node clustering coefficients.
///
/// Unweighted: `2 T(u) / (deg(u) (deg(u) - 1))`. Weighted: the geometric mean
/// of normalized triangle weights, summed over ordered neighbor pairs and
/// divided by `deg(u) (deg(u) - 1)`. Nodes of degree at most one get 0.
pub fn clustering_coefficients(graph: &Graph, weighted: bool) -> Vec<f64> {
    let max_w = graph.max_weight().max(1) as f64;
    let norm = |w: u64| if weighted { w as f64 / max_w } else { 1.0 };
    (0..graph.n())
        .map(|u| {
            let nbrs = graph.neighbors(u);
            let k = nbrs.len();
            if k <= 1 {
                return 0.0;
            }
            let mut sum = 0.0;
            for (i, &(v, wuv)) in nbrs.iter().enumerate() {
                for &(w, wuw) in &nbrs[i + 1..] {
                    if let Some(wvw) = graph.weight(v, w) {
                        sum += (norm(wuv) * norm(wuw) * norm(wvw)).cbrt();
                    }
                }
            }
            // Each unordered pair stands for two ordered ones.
            2.0 * sum / (k * (k - 1)) as f64
        })
        .collect()
}

pub fn node_features(instance: &StpInstance) -> Result<FeatureMatrix> {
    let graph = instance.graph();
    let n = graph.n();
    let dist = all_pairs_shortest_paths(graph)?;
    let diameter = dist.max().max(1) as f64;
    let degree_scale = (n.max(2) - 1) as f64;
    let clustering = clustering_coefficients(graph, true);
    let terminals = instance.terminals();
    let mut data = Vec::with_capacity(n * FEATURE_WIDTH);
    for v in 0..n {
        let row = dist.row(v);
        let nearest = terminals.iter().map(|&t| row[t]).min().unwrap_or(0) as f64;
        let mean = terminals.iter().map(|&t| row[t] as f64).sum::<f64>() / terminals.len() as f64;
        data.extend([
            f64::from(u8::from(instance.is_terminal(v))),
            graph.degree(v) as f64 / degree_scale,
            clustering[v],
            nearest / diameter,
            mean / diameter,
        ]);
    }
    Ok(FeatureMatrix {
        data,
        n,
        degree_scale,
        distance_scale: graph.real(diameter as u64),
    })
}
