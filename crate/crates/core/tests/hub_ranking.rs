//! Soft regression: a GCN trained on small hub-and-triangle fixtures should
//! score the hub above an arbitrary non-terminal most of the time.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stpkit::dataset::{Dataset, DatasetEntry};
use stpkit::graph::Graph;
use stpkit::models::{predict_scores, train, TrainConfig, Variant};
use stpkit::{Execution, StpInstance};

/// Three terminals on a weight-5 triangle, a hub joined to each at weight 3,
/// and a few distractors hung off random nodes with weights 4..=10. Node ids
/// are shuffled; returns the instance and the hub's id.
fn fixture(seed: u64) -> (StpInstance, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extra = rng.gen_range(3..=6);
    let n = 4 + extra;
    let mut edges = vec![
        (0, 1, 5),
        (0, 2, 5),
        (1, 2, 5),
        (0, 3, 3),
        (1, 3, 3),
        (2, 3, 3),
    ];
    for v in 4..n {
        let mut anchors: Vec<usize> = (0..v).collect();
        anchors.shuffle(&mut rng);
        for &u in anchors.iter().take(rng.gen_range(1..=2)) {
            edges.push((u, v, rng.gen_range(4..=10)));
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let g = Graph::new(n, edges).unwrap();
    let inst = StpInstance::new(g, vec![0, 1, 2], format!("hub{seed}")).unwrap();
    (inst.permuted(&perm).unwrap(), perm[3])
}

#[test]
fn trained_gcn_ranks_the_hub_above_random_non_terminals() {
    let mut ds = Dataset {
        entries: (0..40)
            .map(|s| DatasetEntry::unlabeled(fixture(s).0, None))
            .collect(),
    };
    ds.label(3, Execution::default());
    let model = train(Variant::Gcn, &ds, &TrainConfig::default())
        .unwrap()
        .params;

    let mut pick = ChaCha8Rng::seed_from_u64(60);
    let mut wins = 0;
    for seed in 10_000..10_050 {
        let (inst, hub) = fixture(seed);
        let scores = predict_scores(&model, &inst).unwrap().0;
        let others: Vec<usize> = (0..inst.n())
            .filter(|&v| v != hub && !inst.is_terminal(v))
            .collect();
        let rival = *others.choose(&mut pick).unwrap();
        wins += usize::from(scores[hub] > scores[rival]);
    }
    println!("hub ranked above a random non-terminal in {wins}/50 fixtures");
    assert!(wins >= 30, "{wins}/50");
}
