use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use stpkit::dataset::{generate_dataset, Dataset, GridSpec};
use stpkit::generators::{generate_instance, Family, GeneratorConfig};
use stpkit::graph::all_pairs_shortest_paths_with;
use stpkit::harness::{evaluate, Method};
use stpkit::Execution;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn corpus() -> Dataset {
    let grid = GridSpec {
        families: Family::ALL.to_vec(),
        sizes: vec![20, 30],
        fractions: vec![0.2, 0.3],
        seeds_per_cell: 3,
        weighted: true,
        base_seed: 1,
    };
    generate_dataset(&grid.configs(), Execution::Parallel)
}

fn labeling(c: &mut Criterion) {
    let ds = corpus();
    let mut group = c.benchmark_group("label");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let mut d = ds.clone();
                d.label(10, exec);
                black_box(d)
            })
        });
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let mut ds = corpus();
    ds.label(10, Execution::Parallel);
    let methods = [Method::Exact, Method::TwoApprox];
    let mut group = c.benchmark_group("evaluate");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(evaluate(&methods, &ds, None, exec).unwrap()))
        });
    }
    group.finish();
}

fn all_pairs(c: &mut Criterion) {
    let mut cfg = GeneratorConfig::new(Family::Ge, 400, 2);
    cfg.weighted = true;
    let inst = generate_instance(&cfg).unwrap();
    let mut group = c.benchmark_group("all_pairs");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(all_pairs_shortest_paths_with(inst.graph(), exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, labeling, evaluation, all_pairs);
criterion_main!(benches);
