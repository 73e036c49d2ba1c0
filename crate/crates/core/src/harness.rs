//! Approximation-ratio evaluation and dataset distribution tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::approx::two_approx;
use crate::dataset::{Dataset, DatasetEntry, Split};
use crate::error::{Error, Result};
use crate::exact::{dreyfus_wagner_capped, verify_steiner_tree};
use crate::exec::Execution;
use crate::generators::Family;
use crate::graph::{graph_stats, SteinerTree, StpInstance, Weight};
use crate::heuristics::{h1_induced_mst, h2_terminal_promotion};
use crate::models::{predict_scores, ModelParams};

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone)]
pub enum Method {
    Exact,
    TwoApprox,
    H1(Arc<ModelParams>),
    H2(Arc<ModelParams>),
}

impl Method {
    /// Table label, e.g. `2approx` or `h2_gcn`.
    pub fn name(&self) -> String {
        match self {
            Method::Exact => "exact".into(),
            Method::TwoApprox => "2approx".into(),
            Method::H1(m) => format!("h1_{}", m.variant.as_str()),
            Method::H2(m) => format!("h2_{}", m.variant.as_str()),
        }
    }

    pub fn run(&self, instance: &StpInstance) -> Result<SteinerTree> {
        match self {
            Method::Exact => {
                dreyfus_wagner_capped(instance, instance.terminals().len()).map(|r| r.tree)
            }
            Method::TwoApprox => two_approx(instance),
            Method::H1(m) => h1_induced_mst(instance, &predict_scores(m, instance)?.0),
            Method::H2(m) => h2_terminal_promotion(instance, &predict_scores(m, instance)?.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub id: String,
    pub family: String,
    pub method: String,
    /// Scaled integer cost; divide by the graph denominator for the real value.
    pub cost: Weight,
    pub optimal_cost: Weight,
    pub ratio: f64,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupStats {
    pub method: String,
    /// Generator family, or `all` for the pooled row.
    pub family: String,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    pub count: usize,
    pub total_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub rows: Vec<ReportRow>,
    pub summary: Vec<GroupStats>,
    /// Selected instances skipped for lack of an optimal cost.
    pub unlabeled: usize,
}

fn family_name(f: Option<Family>) -> String {
    f.map_or_else(|| "unknown".to_string(), |f| f.as_str().to_string())
}

fn evaluate_entry(methods: &[Method], e: &DatasetEntry, optimal: Weight) -> Result<Vec<ReportRow>> {
    let inst = &e.instance;
    methods
        .iter()
        .map(|m| {
            let start = Instant::now();
            let tree = m.run(inst)?;
            let elapsed_secs = start.elapsed().as_secs_f64();
            let check = verify_steiner_tree(inst, &tree);
            let cost = match check.cost {
                Some(c) if check.valid => c,
                _ => {
                    return Err(Error::InvalidTree {
                        method: m.name(),
                        instance: inst.id.clone(),
                    })
                }
            };
            Ok(ReportRow {
                id: inst.id.clone(),
                family: family_name(e.family),
                method: m.name(),
                cost,
                optimal_cost: optimal,
                ratio: cost as f64 / optimal as f64,
                elapsed_secs,
            })
        })
        .collect()
}

/// Runs every method on every labeled entry of `split` (all entries when
/// `None`). Any invalid tree aborts the whole evaluation.
pub fn evaluate(
    methods: &[Method],
    dataset: &Dataset,
    split: Option<Split>,
    exec: Execution,
) -> Result<RatioReport> {
    let selected: Vec<&DatasetEntry> = dataset
        .entries
        .iter()
        .filter(|e| split.is_none_or(|s| e.split == s))
        .collect();
    let labeled: Vec<(&DatasetEntry, Weight)> = selected
        .iter()
        .filter_map(|e| e.optimal_cost().map(|c| (*e, c)))
        .collect();
    let unlabeled = selected.len() - labeled.len();
    let per_entry = exec.map(&labeled, |(e, opt)| evaluate_entry(methods, e, *opt));
    let mut rows = Vec::new();
    for r in per_entry {
        rows.extend(r?);
    }
    let summary = summarize(methods, &rows);
    Ok(RatioReport {
        rows,
        summary,
        unlabeled,
    })
}

fn summarize(methods: &[Method], rows: &[ReportRow]) -> Vec<GroupStats> {
    let mut families: Vec<String> = Vec::new();
    for r in rows {
        if !families.contains(&r.family) {
            families.push(r.family.clone());
        }
    }
    families.sort();
    families.push("all".into());
    let mut out = Vec::new();
    for m in methods {
        let name = m.name();
        for fam in &families {
            let group: Vec<&ReportRow> = rows
                .iter()
                .filter(|r| r.method == name && (fam == "all" || r.family == *fam))
                .collect();
            if group.is_empty() {
                continue;
            }
            out.push(GroupStats {
                method: name.clone(),
                family: fam.clone(),
                max_ratio: group.iter().map(|r| r.ratio).fold(f64::MIN, f64::max),
                mean_ratio: group.iter().map(|r| r.ratio).sum::<f64>() / group.len() as f64,
                count: group.len(),
                total_secs: group.iter().map(|r| r.elapsed_secs).sum(),
            });
        }
    }
    out
}

impl RatioReport {
    pub fn group(&self, method: &str, family: &str) -> Option<&GroupStats> {
        self.summary
            .iter()
            .find(|g| g.method == method && g.family == family)
    }

    pub fn rows_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a ReportRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn rows_csv(&self) -> String {
        let mut s = String::from("id,family,method,cost,optimal_cost,ratio,elapsed_secs\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.id, r.family, r.method, r.cost, r.optimal_cost, r.ratio, r.elapsed_secs
            );
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("method,family,max_ratio,mean_ratio,count,total_secs\n");
        for g in &self.summary {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                g.method, g.family, g.max_ratio, g.mean_ratio, g.count, g.total_secs
            );
        }
        s
    }

    /// Writes `report.json`, `rows.csv` and `summary.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json()?)?;
        fs::write(dir.join("rows.csv"), self.rows_csv())?;
        fs::write(dir.join("summary.csv"), self.summary_csv())?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub family: String,
    /// `density` or `radius`.
    pub metric: String,
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
    pub mean: f64,
}

impl Histogram {
    /// Equal-width bins over `[min, max]` of the values; the top edge falls
    /// into the last bin and a degenerate range puts everything in bin 0.
    pub fn new(family: &str, metric: &str, values: &[f64]) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut counts = vec![0; HISTOGRAM_BINS];
        for &x in values {
            let bin = if hi > lo {
                (((x - lo) / (hi - lo)) * HISTOGRAM_BINS as f64) as usize
            } else {
                0
            };
            counts[bin.min(HISTOGRAM_BINS - 1)] += 1;
        }
        Histogram {
            family: family.into(),
            metric: metric.into(),
            lo,
            hi,
            counts,
            mean: values.iter().sum::<f64>() / values.len().max(1) as f64,
        }
    }

    pub fn bin_edges(&self, bin: usize) -> (f64, f64) {
        let width = (self.hi - self.lo) / HISTOGRAM_BINS as f64;
        (
            self.lo + width * bin as f64,
            self.lo + width * (bin + 1) as f64,
        )
    }
}

/// Per-family density and radius histograms, families in sorted order.
pub fn distribution_stats(dataset: &Dataset) -> Result<Vec<Histogram>> {
    let mut families: Vec<Option<Family>> = Vec::new();
    for e in &dataset.entries {
        if !families.contains(&e.family) {
            families.push(e.family);
        }
    }
    families.sort_by_key(|f| family_name(*f));
    let mut out = Vec::new();
    for fam in families {
        let mut density = Vec::new();
        let mut radius = Vec::new();
        for e in dataset.entries.iter().filter(|e| e.family == fam) {
            let s = graph_stats(e.instance.graph())?;
            density.push(s.density);
            radius.push(s.radius as f64);
        }
        let name = family_name(fam);
        out.push(Histogram::new(&name, "density", &density));
        out.push(Histogram::new(&name, "radius", &radius));
    }
    Ok(out)
}

pub fn histograms_csv(hists: &[Histogram]) -> String {
    let mut s = String::from("family,metric,bin,lo,hi,count\n");
    for h in hists {
        for (b, c) in h.counts.iter().enumerate() {
            let (lo, hi) = h.bin_edges(b);
            let _ = writeln!(s, "{},{},{b},{lo},{hi},{c}", h.family, h.metric);
        }
    }
    s
}
