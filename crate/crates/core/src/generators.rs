//! Random instance generators: Erdős–Rényi, Watts–Strogatz, Barabási–Albert
//! and random geometric graphs, with seeded terminal selection.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{is_connected, Graph, NodeId, StpInstance, Weight};

pub const WS_DEFAULT_K: usize = 6;
pub const WS_DEFAULT_P: f64 = 0.2;
pub const BA_DEFAULT_M: usize = 5;
pub const GE_DEFAULT_EPS: f64 = 0.5;
pub const MAX_WEIGHT: Weight = 10;
pub const MAX_ATTEMPTS: usize = 100;
/// Sub-seed stride between connectivity retries.
pub const RETRY_STRIDE: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Er,
    Ws,
    Ba,
    Ge,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Er, Family::Ws, Family::Ba, Family::Ge];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Er => "er",
            Family::Ws => "ws",
            Family::Ba => "ba",
            Family::Ge => "ge",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str().to_uppercase())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "er" => Ok(Family::Er),
            "ws" => Ok(Family::Ws),
            "ba" => Ok(Family::Ba),
            "ge" => Ok(Family::Ge),
            other => Err(Error::InvalidConfig(format!("unknown family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub family: Family,
    pub n: usize,
    /// `None` means the connectivity threshold `2 ln n / n`.
    pub er_p: Option<f64>,
    pub ws_k: usize,
    pub ws_p: f64,
    pub ba_m: usize,
    pub ge_eps: f64,
    pub weighted: bool,
    pub terminal_fraction: f64,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn new(family: Family, n: usize, seed: u64) -> Self {
        GeneratorConfig {
            family,
            n,
            er_p: None,
            ws_k: WS_DEFAULT_K,
            ws_p: WS_DEFAULT_P,
            ba_m: BA_DEFAULT_M,
            ge_eps: GE_DEFAULT_EPS,
            weighted: false,
            terminal_fraction: 0.2,
            seed,
        }
    }

    /// Edge probability actually used for ER: never below `2 ln n / n`.
    pub fn effective_er_p(&self) -> f64 {
        let threshold = 2.0 * (self.n as f64).ln() / self.n as f64;
        self.er_p.unwrap_or(0.0).max(threshold).min(1.0)
    }

    /// Connection radius for GE in the unit square.
    pub fn ge_radius(&self) -> f64 {
        let n = self.n as f64;
        ((1.0 + self.ge_eps) * n.ln() / (std::f64::consts::PI * n)).sqrt()
    }

    /// `round(fraction * n)` clamped to `[2, n - 1]`.
    pub fn terminal_count(&self) -> usize {
        let raw = (self.terminal_fraction * self.n as f64).round() as usize;
        raw.clamp(2, self.n - 1)
    }

    pub fn instance_id(&self) -> String {
        format!(
            "{}_n{}_t{}_{}_s{}",
            self.family.as_str(),
            self.n,
            self.terminal_count(),
            if self.weighted { "w" } else { "u" },
            self.seed
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n < 4 {
            return bad(format!("n must be at least 4, got {}", self.n));
        }
        if !(self.terminal_fraction > 0.0 && self.terminal_fraction < 1.0) {
            return bad(format!(
                "terminal fraction {} outside (0, 1)",
                self.terminal_fraction
            ));
        }
        if let Some(p) = self.er_p {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("ER probability {p} outside [0, 1]"));
            }
        }
        match self.family {
            Family::Ws => {
                if !self.ws_k.is_multiple_of(2) || self.ws_k == 0 || self.ws_k >= self.n {
                    return bad(format!("WS needs even 0 < K < n, got K={}", self.ws_k));
                }
                if !(0.0..=1.0).contains(&self.ws_p) {
                    return bad(format!("WS probability {} outside [0, 1]", self.ws_p));
                }
            }
            Family::Ba => {
                if self.ba_m == 0 || self.ba_m >= self.n {
                    return bad(format!("BA needs 0 < m < n, got m={}", self.ba_m));
                }
            }
            Family::Ge => {
                if self.ge_eps.is_nan() || self.ge_eps <= 0.0 {
                    return bad(format!("GE epsilon must be positive, got {}", self.ge_eps));
                }
            }
            Family::Er => {}
        }
        Ok(())
    }
}

fn er_edges(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Vec<(NodeId, NodeId)> {
    let p = cfg.effective_er_p();
    let mut edges = Vec::new();
    for u in 0..cfg.n {
        for v in u + 1..cfg.n {
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    edges
}

fn ws_edges(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Vec<(NodeId, NodeId)> {
    let n = cfg.n;
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    let mut set: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut degree = vec![0usize; n];
    for u in 0..n {
        for j in 1..=cfg.ws_k / 2 {
            set.insert(key(u, (u + j) % n));
        }
    }
    for &(a, b) in &set {
        degree[a] += 1;
        degree[b] += 1;
    }
    // Rewire each lattice edge (u, u + j) in ring order.
    for j in 1..=cfg.ws_k / 2 {
        for u in 0..n {
            if rng.gen::<f64>() >= cfg.ws_p {
                continue;
            }
            let v = (u + j) % n;
            if !set.contains(&key(u, v)) || degree[u] >= n - 1 {
                continue;
            }
            let mut w = rng.gen_range(0..n);
            while w == u || set.contains(&key(u, w)) {
                w = rng.gen_range(0..n);
            }
            set.remove(&key(u, v));
            degree[v] -= 1;
            set.insert(key(u, w));
            degree[w] += 1;
        }
    }
    set.into_iter().collect()
}

fn ba_edges(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Vec<(NodeId, NodeId)> {
    let m = cfg.ba_m;
    let mut edges = Vec::new();
    // Each endpoint appears once per incident edge: degree-proportional draws.
    let mut repeated: Vec<NodeId> = Vec::new();
    let mut targets: Vec<NodeId> = (0..m).collect();
    for source in m..cfg.n {
        for &t in &targets {
            edges.push((t, source));
        }
        repeated.extend(targets.iter().copied());
        repeated.extend(std::iter::repeat_n(source, m));
        let mut chosen = BTreeSet::new();
        while chosen.len() < m {
            chosen.insert(repeated[rng.gen_range(0..repeated.len())]);
        }
        targets = chosen.into_iter().collect();
    }
    edges
}

fn ge_edges(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Vec<(NodeId, NodeId)> {
    let points: Vec<(f64, f64)> = (0..cfg.n).map(|_| (rng.gen(), rng.gen())).collect();
    let r2 = cfg.ge_radius().powi(2);
    let mut edges = Vec::new();
    for u in 0..cfg.n {
        for v in u + 1..cfg.n {
            let (dx, dy) = (points[u].0 - points[v].0, points[u].1 - points[v].1);
            if dx * dx + dy * dy <= r2 {
                edges.push((u, v));
            }
        }
    }
    edges
}

/// Random points used by the GE generator for a given attempt seed; exposed so
/// the radius rule can be checked directly.
pub fn geometric_points(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (rng.gen(), rng.gen())).collect()
}

fn attempt(cfg: &GeneratorConfig, seed: u64) -> Result<Option<StpInstance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = match cfg.family {
        Family::Er => er_edges(cfg, &mut rng),
        Family::Ws => ws_edges(cfg, &mut rng),
        Family::Ba => ba_edges(cfg, &mut rng),
        Family::Ge => ge_edges(cfg, &mut rng),
    };
    let edges: Vec<(NodeId, NodeId, Weight)> = pairs
        .into_iter()
        .map(|(u, v)| {
            let w = if cfg.weighted {
                rng.gen_range(1..=MAX_WEIGHT)
            } else {
                1
            };
            (u, v, w)
        })
        .collect();
    let graph = Graph::new(cfg.n, edges)?;
    if !is_connected(&graph, None) {
        return Ok(None);
    }
    let terminals = sample(&mut rng, cfg.n, cfg.terminal_count()).into_vec();
    let instance = StpInstance::new(graph, terminals, cfg.instance_id())?.with_seed(cfg.seed);
    Ok(Some(instance))
}

/// Generates a connected instance, resampling with seeds
/// `seed + RETRY_STRIDE * k` until one is connected.
pub fn generate_instance(cfg: &GeneratorConfig) -> Result<StpInstance> {
    cfg.validate()?;
    for k in 0..MAX_ATTEMPTS as u64 {
        let seed = cfg.seed.wrapping_add(RETRY_STRIDE.wrapping_mul(k));
        if let Some(instance) = attempt(cfg, seed)? {
            return Ok(instance);
        }
    }
    Err(Error::GenerationFailed {
        family: cfg.family.to_string(),
        seed: cfg.seed,
        attempts: MAX_ATTEMPTS,
    })
}
