//! Labeled corpora: generation grids, exact labeling, train/test split and
//! on-disk persistence.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{dreyfus_wagner_capped, verify_steiner_tree};
use crate::exec::Execution;
use crate::generators::{generate_instance, Family, GeneratorConfig};
use crate::graph::{Edge, NodeId, SteinerTree, StpInstance, Weight};
use crate::steinlib::{parse_stp, serialize_stp};

pub const SIDECAR: &str = "dataset.jsonl";
pub const TRAIN_FRACTION: f64 = 0.8;

/// Terminal fractions of the "many terminals" distribution.
pub const DENSE_FRACTIONS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
/// Terminal fractions of the "few terminals" distribution.
pub const SPARSE_FRACTIONS: [f64; 6] = [0.03, 0.06, 0.09, 0.12, 0.15, 0.18];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub instance: StpInstance,
    pub family: Option<Family>,
    pub optimal: Option<SteinerTree>,
    /// `1` for every node of the optimal tree.
    pub labels: Option<Vec<u8>>,
    pub split: Split,
}

impl DatasetEntry {
    pub fn unlabeled(instance: StpInstance, family: Option<Family>) -> Self {
        DatasetEntry {
            instance,
            family,
            optimal: None,
            labels: None,
            split: Split::Train,
        }
    }

    pub fn optimal_cost(&self) -> Option<Weight> {
        self.optimal.as_ref().map(SteinerTree::cost)
    }

    fn set_optimal(&mut self, tree: SteinerTree) {
        let mut labels = vec![0u8; self.instance.n()];
        for v in tree.nodes() {
            labels[v] = 1;
        }
        self.labels = Some(labels);
        self.optimal = Some(tree);
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub entries: Vec<DatasetEntry>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &DatasetEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn labeled(&self) -> impl Iterator<Item = &DatasetEntry> {
        self.entries.iter().filter(|e| e.labels.is_some())
    }

    /// Largest node count, which sizes the feedforward model.
    pub fn max_nodes(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.instance.n())
            .max()
            .unwrap_or(0)
    }

    /// Solves every unlabeled entry with at most `cap` terminals. Entries
    /// whose solve fails stay unlabeled and are logged; they are never given
    /// a guessed label.
    pub fn label(&mut self, cap: usize, exec: Execution) {
        let todo: Vec<usize> = (0..self.entries.len())
            .filter(|&i| {
                let e = &self.entries[i];
                e.optimal.is_none() && e.instance.terminals().len() <= cap
            })
            .collect();
        let solved = exec.map(&todo, |&i| {
            let inst = &self.entries[i].instance;
            dreyfus_wagner_capped(inst, cap).map(|r| r.tree)
        });
        for (i, res) in todo.into_iter().zip(solved) {
            match res {
                Ok(tree) => self.entries[i].set_optimal(tree),
                Err(e) => log::warn!("left {} unlabeled: {e}", self.entries[i].instance.id),
            }
        }
    }

    /// Seeded shuffle; the first `floor(0.8 N)` entries train, the rest test.
    pub fn assign_split(&mut self, seed: u64) {
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let train = (TRAIN_FRACTION * self.entries.len() as f64).floor() as usize;
        for (rank, &i) in order.iter().enumerate() {
            self.entries[i].split = if rank < train {
                Split::Train
            } else {
                Split::Test
            };
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut seen = HashSet::new();
        let mut sidecar = fs::File::create(dir.join(SIDECAR))?;
        for e in &self.entries {
            let id = &e.instance.id;
            if !seen.insert(id.clone()) {
                return Err(Error::InvalidInstance(format!(
                    "duplicate instance id {id}"
                )));
            }
            let file = format!("{id}.stp");
            fs::write(dir.join(&file), serialize_stp(&e.instance))?;
            let record = Record {
                id: id.clone(),
                seed: e.instance.seed,
                family: e.family,
                file,
                terminals: e.instance.terminals().to_vec(),
                labels: e.labels.clone(),
                split: e.split,
                optimal_cost: e.optimal_cost(),
                optimal_edges: e.optimal.as_ref().map(SteinerTree::edge_pairs),
            };
            writeln!(sidecar, "{}", serde_json::to_string(&record)?)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let sidecar = BufReader::new(fs::File::open(dir.join(SIDECAR))?);
        let mut entries = Vec::new();
        for (lineno, line) in sidecar.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            let r: Record =
                serde_json::from_str(&line).map_err(|e| bad(format!("{SIDECAR}: {e}")))?;
            let mut instance = parse_stp(&fs::read_to_string(dir.join(&r.file))?)?;
            instance.id = r.id.clone();
            instance.seed = r.seed;
            if instance.terminals() != r.terminals.as_slice() {
                return Err(bad(format!(
                    "terminals of {} disagree with {}",
                    r.id, r.file
                )));
            }
            let optimal = match r.optimal_edges {
                None => None,
                Some(pairs) => Some(rebuild_tree(&instance, &pairs).map_err(bad)?),
            };
            if optimal.as_ref().map(SteinerTree::cost) != r.optimal_cost {
                return Err(bad(format!(
                    "optimal cost of {} does not match its tree",
                    r.id
                )));
            }
            let mut entry = DatasetEntry {
                instance,
                family: r.family,
                optimal: None,
                labels: None,
                split: r.split,
            };
            if let Some(tree) = optimal {
                entry.set_optimal(tree);
                if r.labels.as_ref() != entry.labels.as_ref() {
                    return Err(bad(format!("labels of {} do not match its tree", r.id)));
                }
            } else if r.labels.is_some() {
                return Err(bad(format!("{} has labels but no tree", r.id)));
            }
            entries.push(entry);
        }
        Ok(Dataset { entries })
    }
}

fn rebuild_tree(
    instance: &StpInstance,
    pairs: &[(NodeId, NodeId)],
) -> std::result::Result<SteinerTree, String> {
    let g = instance.graph();
    let edges = pairs
        .iter()
        .map(|&(u, v)| {
            g.weight(u, v)
                .map(|w| Edge::new(u, v, w))
                .ok_or_else(|| format!("tree edge ({u}, {v}) is not in {}", instance.id))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let tree = SteinerTree::from_edges(edges);
    if !verify_steiner_tree(instance, &tree).valid {
        return Err(format!(
            "stored tree of {} is not a Steiner tree",
            instance.id
        ));
    }
    Ok(tree)
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    seed: Option<u64>,
    family: Option<Family>,
    file: String,
    terminals: Vec<NodeId>,
    labels: Option<Vec<u8>>,
    split: Split,
    optimal_cost: Option<Weight>,
    optimal_edges: Option<Vec<(NodeId, NodeId)>>,
}

/// Cartesian sweep of generator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub families: Vec<Family>,
    pub sizes: Vec<usize>,
    pub fractions: Vec<f64>,
    pub seeds_per_cell: usize,
    pub weighted: bool,
    pub base_seed: u64,
}

impl GridSpec {
    /// Sizes 10..=60 with both terminal distributions.
    pub fn desk_default(base_seed: u64) -> Self {
        GridSpec {
            families: Family::ALL.to_vec(),
            sizes: (1..=6).map(|k| 10 * k).collect(),
            fractions: SPARSE_FRACTIONS
                .iter()
                .chain(&DENSE_FRACTIONS)
                .copied()
                .collect(),
            seeds_per_cell: 1,
            weighted: true,
            base_seed,
        }
    }

    /// One config per grid cell and seed, in a fixed order. Seeds are
    /// derived from the base seed and the position in the sweep.
    pub fn configs(&self) -> Vec<GeneratorConfig> {
        let mut out = Vec::new();
        for &family in &self.families {
            for &n in &self.sizes {
                for &fraction in &self.fractions {
                    for _ in 0..self.seeds_per_cell {
                        let seed = splitmix64(self.base_seed ^ splitmix64(out.len() as u64));
                        let mut cfg = GeneratorConfig::new(family, n, seed);
                        cfg.terminal_fraction = fraction;
                        cfg.weighted = self.weighted;
                        out.push(cfg);
                    }
                }
            }
        }
        out
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    (z ^ (z >> 31)) >> 11
}

/// Generates one instance per config, in config order. Configs that fail to
/// produce a connected instance are logged and skipped.
pub fn generate_dataset(configs: &[GeneratorConfig], exec: Execution) -> Dataset {
    let generated = exec.map(configs, generate_instance);
    let entries = configs
        .iter()
        .zip(generated)
        .filter_map(|(cfg, res)| match res {
            Ok(inst) => Some(DatasetEntry::unlabeled(inst, Some(cfg.family))),
            Err(e) => {
                log::warn!("dropped {}: {e}", cfg.instance_id());
                None
            }
        })
        .collect();
    Dataset { entries }
}

/// Generates, labels every instance within `exact_budget` terminals, and
/// splits 80/20.
pub fn build_dataset(
    configs: &[GeneratorConfig],
    exact_budget: usize,
    split_seed: u64,
    exec: Execution,
) -> Dataset {
    let mut ds = generate_dataset(configs, exec);
    ds.label(exact_budget, exec);
    ds.assign_split(split_seed);
    ds
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::star_fixture;

    fn small_grid() -> GridSpec {
        GridSpec {
            families: vec![Family::Er],
            sizes: vec![10, 20],
            fractions: vec![0.2, 0.4],
            seeds_per_cell: 2,
            weighted: true,
            base_seed: 5,
        }
    }

    #[test]
    fn grid_is_cartesian() {
        let cfgs = small_grid().configs();
        assert_eq!(cfgs.len(), 8);
        let seeds: HashSet<u64> = cfgs.iter().map(|c| c.seed).collect();
        assert_eq!(seeds.len(), 8);
        assert_eq!(cfgs, small_grid().configs());
        let desk = GridSpec::desk_default(0);
        assert_eq!(desk.configs().len(), 4 * 6 * 10);
    }

    #[test]
    fn labels_cover_terminals_and_optimum() {
        let ds = build_dataset(&small_grid().configs(), 10, 1, Execution::Parallel);
        assert_eq!(ds.len(), 8);
        for e in ds.labeled() {
            let labels = e.labels.as_ref().unwrap();
            assert_eq!(labels.len(), e.instance.n());
            assert!(e.instance.terminals().iter().all(|&t| labels[t] == 1));
            let tree = e.optimal.as_ref().unwrap();
            assert!(verify_steiner_tree(&e.instance, tree).valid);
            assert_eq!(
                labels.iter().filter(|&&l| l == 1).count(),
                tree.nodes().len()
            );
        }
        assert_eq!(ds.labeled().count(), 8);
    }

    #[test]
    fn instances_over_budget_stay_unlabeled() {
        let mut cfg = GeneratorConfig::new(Family::Er, 20, 3);
        cfg.terminal_fraction = 0.8;
        let ds = build_dataset(&[cfg], 6, 0, Execution::Sequential);
        assert_eq!(ds.len(), 1);
        assert!(ds.entries[0].labels.is_none());
    }

    #[test]
    fn split_rounds_train_down() {
        let mut ds = Dataset {
            entries: (0..10)
                .map(|i| {
                    let mut inst = star_fixture();
                    inst.id = format!("f{i}");
                    DatasetEntry::unlabeled(inst, None)
                })
                .collect(),
        };
        ds.assign_split(7);
        assert_eq!(ds.split(Split::Train).count(), 8);
        assert_eq!(ds.split(Split::Test).count(), 2);
        let first: Vec<Split> = ds.entries.iter().map(|e| e.split).collect();
        ds.assign_split(7);
        assert_eq!(
            first,
            ds.entries.iter().map(|e| e.split).collect::<Vec<_>>()
        );
        ds.entries.truncate(3);
        ds.assign_split(7);
        assert_eq!(ds.split(Split::Train).count(), 2);
    }

    #[test]
    fn sequential_and_parallel_builds_agree() {
        let cfgs = small_grid().configs();
        let a = build_dataset(&cfgs, 10, 2, Execution::Sequential);
        let b = build_dataset(&cfgs, 10, 2, Execution::Parallel);
        assert_eq!(a, b);
    }

    #[test]
    fn save_load_round_trip() {
        let mut cfgs = small_grid().configs();
        cfgs[0].terminal_fraction = 0.8;
        let ds = build_dataset(&cfgs, 6, 3, Execution::Parallel);
        assert!(ds.entries.iter().any(|e| e.labels.is_none()));
        let dir = tempfile::tempdir().unwrap();
        ds.save(dir.path()).unwrap();
        let back = Dataset::load(dir.path()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn load_rejects_tampered_sidecar() {
        let ds = build_dataset(&small_grid().configs()[..2], 10, 3, Execution::Sequential);
        let dir = tempfile::tempdir().unwrap();
        ds.save(dir.path()).unwrap();
        let path = dir.path().join(SIDECAR);
        let text = fs::read_to_string(&path).unwrap();
        let mut first: serde_json::Value =
            serde_json::from_str(text.lines().next().unwrap()).unwrap();
        first["optimal_cost"] = serde_json::json!(first["optimal_cost"].as_u64().unwrap() + 1);
        let rest: Vec<&str> = text.lines().skip(1).collect();
        fs::write(&path, format!("{first}\n{}\n", rest.join("\n"))).unwrap();
        match Dataset::load(dir.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_refused() {
        let e = DatasetEntry::unlabeled(star_fixture(), None);
        let ds = Dataset {
            entries: vec![e.clone(), e],
        };
        let dir = tempfile::tempdir().unwrap();
        assert!(ds.save(dir.path()).is_err());
    }
}
