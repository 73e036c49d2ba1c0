use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tape::sigmoid;
use super::*;
use crate::generators::{generate_instance, Family, GeneratorConfig};
use crate::graph::fixtures::{star_fixture, D};
use crate::graph::{Graph, StpInstance};

fn five_node() -> StpInstance {
    let g = Graph::new(
        5,
        [
            (0, 1, 3),
            (1, 2, 2),
            (2, 3, 4),
            (3, 4, 1),
            (0, 4, 5),
            (1, 3, 2),
        ],
    )
    .unwrap();
    StpInstance::new(g, vec![0, 2, 4], "five").unwrap()
}

fn small_hyper(variant: Variant, n_max: usize) -> Hyperparams {
    let mut h = Hyperparams::for_variant(variant, n_max);
    h.hidden = 6;
    h.state_dim = 3;
    h
}

fn labels_for(n: usize) -> Vec<u8> {
    (0..n).map(|v| (v % 2 == 0) as u8).collect()
}

fn zero_all(params: &mut ModelParams) {
    for t in &mut params.tensors {
        t.value.data.iter_mut().for_each(|x| *x = 0.0);
    }
}

fn generated(n: usize, seed: u64) -> StpInstance {
    let mut cfg = GeneratorConfig::new(Family::Er, n, seed);
    cfg.er_p = Some(0.3);
    generate_instance(&cfg).unwrap()
}

#[test]
fn ff_zero_parameters_give_one_half() {
    let inst = star_fixture();
    let mut p = ModelParams::init(Variant::Ff, Hyperparams::for_variant(Variant::Ff, 8), 1);
    zero_all(&mut p);
    let s = predict_scores(&p, &inst).unwrap();
    assert_eq!(s.0, vec![0.5; 4]);
}

#[test]
fn ff_encoding_of_fixture() {
    let inst = star_fixture();
    let x = ff_encoding(inst.graph(), inst.terminals(), 8).unwrap();
    assert_eq!(x.len(), 28 + 8);
    assert_eq!(x[..28].iter().filter(|&&v| v == 1.0).count(), 6);
    assert_eq!(x[28..].iter().sum::<f64>(), 3.0);
    assert!(ff_encoding(inst.graph(), inst.terminals(), 3).is_err());
}

#[test]
fn ff_padding_does_not_change_scores() {
    // Embed an n_max = 6 model into an n_max = 9 one, with random weights on
    // the rows that only padding nodes can activate.
    let inst = star_fixture();
    let small = ModelParams::init(Variant::Ff, Hyperparams::for_variant(Variant::Ff, 6), 3);
    let mut big = ModelParams::init(Variant::Ff, Hyperparams::for_variant(Variant::Ff, 9), 4);
    let pair = |u: usize, v: usize, m: usize| u * m - u * (u + 1) / 2 + (v - u - 1);
    let (ps, pb) = (15, 36);
    let fc1s = small.tensor("fc1.w").unwrap().clone();
    {
        let fc1b = big.tensor_mut("fc1.w").unwrap();
        for u in 0..6 {
            for v in u + 1..6 {
                let (src, dst) = (pair(u, v, 6), pair(u, v, 9));
                fc1b.row_mut(dst).copy_from_slice(fc1s.row(src));
            }
            fc1b.row_mut(pb + u).copy_from_slice(fc1s.row(ps + u));
        }
    }
    for name in ["fc1.b", "fc2.w", "fc2.b"] {
        *big.tensor_mut(name).unwrap() = small.tensor(name).unwrap().clone();
    }
    for name in ["out.w", "out.b"] {
        let s = small.tensor(name).unwrap().clone();
        let b = big.tensor_mut(name).unwrap();
        for r in 0..s.rows {
            b.row_mut(r)[..6].copy_from_slice(s.row(r));
        }
    }
    let a = predict_scores(&small, &inst).unwrap();
    let b = predict_scores(&big, &inst).unwrap();
    assert_eq!(a, b);
}

#[test]
fn gnn_zero_transition_keeps_states_at_origin() {
    let inst = star_fixture();
    let mut p = ModelParams::init(Variant::Gnn, Hyperparams::for_variant(Variant::Gnn, 0), 5);
    for t in &mut p.tensors {
        if t.name.starts_with("transition") {
            t.value.data.iter_mut().for_each(|x| *x = 0.0);
        }
    }
    for t in &mut p.tensors {
        if t.name.starts_with("output") && t.name.ends_with(".w1") {
            // Features differ per node, so only the state columns are zeroed.
            let s = 5;
            for r in 0..t.value.rows {
                if r >= s {
                    t.value.row_mut(r).iter_mut().for_each(|x| *x = 0.0);
                }
            }
        }
    }
    let ctx = GraphContext::build(&inst, &p).unwrap();
    let out = gnn_diffusion(&p, &ctx, Some(7)).unwrap();
    assert!(out.states.data.iter().all(|&x| x == 0.0));
    assert!(out.scores.windows(2).all(|w| w[0] == w[1]));
    let free = gnn_diffusion(&p, &ctx, None).unwrap();
    assert_eq!(free.iterations, 1);
}

#[test]
fn gnn_single_edge_uses_one_neighbor_term() {
    let g = Graph::new(2, [(0, 1, 4)]).unwrap();
    let inst = StpInstance::new(g, vec![0, 1], "edge").unwrap();
    let p = ModelParams::init(Variant::Gnn, Hyperparams::for_variant(Variant::Gnn, 0), 6);
    let ctx = GraphContext::build(&inst, &p).unwrap();
    let out = gnn_diffusion(&p, &ctx, Some(1)).unwrap();
    let feats = crate::features::node_features(&inst).unwrap();
    let (w1, b1) = (
        p.tensor("transition.w1").unwrap(),
        p.tensor("transition.b1").unwrap(),
    );
    let (w2, b2) = (
        p.tensor("transition.w2").unwrap(),
        p.tensor("transition.b2").unwrap(),
    );
    for (n, v) in [(0, 1), (1, 0)] {
        let mut input = feats.row(n).to_vec();
        input.push(1.0);
        input.extend(std::iter::repeat_n(0.0, 5));
        input.extend_from_slice(feats.row(v));
        let x = Matrix::from_vec(1, input.len(), input);
        let mut h = x.matmul(w1);
        h.add_assign(b1);
        let h = h.map(f64::tanh);
        let mut o = h.matmul(w2);
        o.add_assign(b2);
        for k in 0..5 {
            assert!((o.get(0, k) - out.states.get(n, k)).abs() < 1e-14);
        }
    }
}

#[test]
fn gnn_converges_on_fixture_with_small_weights() {
    let inst = star_fixture();
    let mut p = ModelParams::init(Variant::Gnn, Hyperparams::for_variant(Variant::Gnn, 0), 7);
    for t in &mut p.tensors {
        t.value.data.iter_mut().for_each(|x| *x *= 0.1);
    }
    let ctx = GraphContext::build(&inst, &p).unwrap();
    let out = gnn_diffusion(&p, &ctx, None).unwrap();
    assert!(out.iterations < 50, "took {} steps", out.iterations);
    assert!(*out.changes.last().unwrap() < 1e-4);
    assert!(out.changes.windows(2).skip(1).all(|w| w[1] <= w[0] * 1.5));
}

#[test]
fn gnn_divergence_reports_iteration() {
    let inst = star_fixture();
    let mut p = ModelParams::init(Variant::Gnn, Hyperparams::for_variant(Variant::Gnn, 0), 8);
    p.tensor_mut("transition.b2").unwrap().data[0] = 1e7;
    let ctx = GraphContext::build(&inst, &p).unwrap();
    match gnn_diffusion(&p, &ctx, None) {
        Err(Error::Divergence { iteration }) => assert_eq!(iteration, 1),
        other => panic!("expected divergence, got {:?}", other.map(|o| o.iterations)),
    }
}

#[test]
fn gcn_layer_single_node() {
    let g = Graph::new(1, []).unwrap();
    let h = Matrix::from_vec(1, 2, vec![0.3, -0.2]);
    let b = Matrix::from_vec(1, 2, vec![0.1, -0.5]);
    let out = gcn_layer(&h, &g, None, &Matrix::identity(2), &b);
    assert!((out.get(0, 0) - 0.4).abs() < 1e-15);
    assert_eq!(out.get(0, 1), 0.0);
    // The self term adds a second copy of h.
    let out = gcn_layer(&h, &g, Some(&Matrix::identity(2)), &Matrix::identity(2), &b);
    assert!((out.get(0, 0) - 0.7).abs() < 1e-15);
    assert!((out.get(0, 1) - 0.0).abs() < 1e-15);
}

#[test]
fn gcn_layer_symmetric_pair() {
    let g = Graph::new(2, [(0, 1, 2)]).unwrap();
    let h = Matrix::from_vec(2, 3, vec![0.5, -1.0, 2.0, 0.5, -1.0, 2.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let w = Matrix::from_vec(3, 4, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let b = Matrix::from_vec(1, 4, vec![0.1; 4]);
    let ws = Matrix::from_vec(3, 4, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let out = gcn_layer(&h, &g, Some(&ws), &w, &b);
    assert_eq!(out.row(0), out.row(1));
}

#[test]
fn normalized_adjacency_matches_dense_oracle() {
    let inst = star_fixture();
    let g = inst.graph();
    let n = g.n();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        a[i][i] = 1.0;
        for j in 0..n {
            if g.has_edge(i, j) {
                a[i][j] = 1.0;
            }
        }
    }
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let sparse = normalized_adjacency(g).to_dense();
    for i in 0..n {
        let oracle: f64 = (0..n).map(|j| a[i][j] / (deg[i] * deg[j]).sqrt()).sum();
        let got: f64 = sparse.row(i).iter().sum();
        assert!((oracle - got).abs() < 1e-12);
        // K4: every closed degree is 4, so each row sums to 4 / 4.
        assert!((got - 1.0).abs() < 1e-12);
    }
}

#[test]
fn gat_uniform_attention_when_scores_equal() {
    let inst = star_fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let h = Matrix::from_vec(4, 3, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let w = Matrix::from_vec(3, 2, (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let b = Matrix::zeros(1, 2);
    let zero = Matrix::zeros(2, 1);
    let out = gat_attention(&h, inst.graph(), &w, &b, &zero, &zero);
    assert!(out.alpha.iter().all(|&a| (a - 0.25).abs() < 1e-15));
}

#[test]
fn gat_single_node_is_plain_transform() {
    let g = Graph::new(1, []).unwrap();
    let h = Matrix::from_vec(1, 2, vec![1.5, -2.0]);
    let w = Matrix::from_vec(2, 2, vec![1.0, 0.5, 0.0, 1.0]);
    let b = Matrix::zeros(1, 2);
    let a = Matrix::from_vec(2, 1, vec![0.3, -0.7]);
    let out = gat_attention(&h, &g, &w, &b, &a, &a);
    assert_eq!(out.alpha, vec![1.0]);
    let wh = h.matmul(&w);
    let elu = |x: f64| if x > 0.0 { x } else { x.exp_m1() };
    assert!((out.output.get(0, 0) - elu(wh.get(0, 0))).abs() < 1e-15);
    assert!((out.output.get(0, 1) - elu(wh.get(0, 1))).abs() < 1e-15);
}

#[test]
fn gat_attention_rows_sum_to_one() {
    let inst = star_fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut rand_m = |r: usize, c: usize| {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-2.0..2.0)).collect())
    };
    let (h, w, b, s, d) = (
        rand_m(4, 5),
        rand_m(5, 3),
        rand_m(1, 3),
        rand_m(3, 1),
        rand_m(3, 1),
    );
    let out = gat_attention(&h, inst.graph(), &w, &b, &s, &d);
    for i in 0..4 {
        let sum: f64 = out
            .pairs
            .iter()
            .zip(&out.alpha)
            .filter(|((r, _), _)| *r == i)
            .map(|(_, a)| a)
            .sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
}

/// Central differences against the tape gradient for every listed entry.
fn gradient_check(params: &ModelParams, inst: &StpInstance, sample: Option<usize>) {
    const H: f64 = 1e-5;
    const TOL: f64 = 1e-4;
    let labels = labels_for(inst.n());
    let ex = Example::new(inst, &labels, params).unwrap();
    let base = forward(params, &ex.context, Mode::Eval, None).unwrap();
    let pinned = base.gnn_iterations;
    let (_, grads) = loss_and_gradient(params, &ex, Mode::Eval, pinned).unwrap();
    let loss_at = |p: &ModelParams| loss(p, &ex, Mode::Eval, pinned).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for (k, t) in params.tensors.iter().enumerate() {
        let mut idx: Vec<usize> = (0..t.value.data.len()).collect();
        if let Some(s) = sample {
            idx.shuffle(&mut rng);
            idx.truncate(s);
        }
        for i in idx {
            let mut p = params.clone();
            p.tensors[k].value.data[i] += H;
            let up = loss_at(&p);
            p.tensors[k].value.data[i] -= 2.0 * H;
            let down = loss_at(&p);
            let fd = (up - down) / (2.0 * H);
            let an = grads[k].data[i];
            let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
            assert!(
                rel <= TOL,
                "{} {}[{i}]: analytic {an:e} numeric {fd:e}",
                params.variant,
                t.name
            );
        }
    }
    assert!(worst <= TOL);
}

#[test]
fn gradients_match_finite_differences_small_models() {
    let inst = five_node();
    for v in Variant::ALL {
        let p = ModelParams::init(v, small_hyper(v, 5), 13);
        gradient_check(&p, &inst, None);
    }
}

#[test]
fn gradients_match_finite_differences_full_size_sampled() {
    let inst = five_node();
    for v in Variant::ALL {
        let p = ModelParams::init(v, Hyperparams::for_variant(v, 5), 14);
        gradient_check(&p, &inst, Some(25));
    }
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let inst = five_node();
    for v in Variant::ALL {
        let init = ModelParams::init(v, small_hyper(v, 5), 15);
        let ex = Example::new(&inst, &labels_for(5), &init).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            ..TrainConfig::default()
        };
        let out = train_examples(init.clone(), &[ex], &cfg).unwrap();
        assert_eq!(out.params, init);
        assert_eq!(out.loss_curve.len(), 3);
    }
}

#[test]
fn invalid_training_configs_rejected() {
    let inst = five_node();
    let init = ModelParams::init(Variant::Gcn, small_hyper(Variant::Gcn, 5), 16);
    let ex = Example::new(&inst, &labels_for(5), &init).unwrap();
    for cfg in [
        TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        },
        TrainConfig {
            learning_rate: -1e-3,
            ..TrainConfig::default()
        },
        TrainConfig {
            learning_rate: f64::NAN,
            ..TrainConfig::default()
        },
    ] {
        assert!(train_examples(init.clone(), std::slice::from_ref(&ex), &cfg).is_err());
    }
    assert!(train_examples(init.clone(), &[], &TrainConfig::default()).is_err());
    assert!(Example::new(&inst, &[1, 0], &init).is_err());
}

#[test]
fn non_finite_loss_aborts_with_epoch() {
    let inst = five_node();
    let mut init = ModelParams::init(Variant::Gcn, small_hyper(Variant::Gcn, 5), 17);
    init.tensor_mut("out.b").unwrap().data[0] = f64::NAN;
    let ex = Example::new(&inst, &labels_for(5), &init).unwrap();
    match train_examples(init, &[ex], &TrainConfig::default()) {
        Err(Error::NonFiniteLoss { epoch }) => assert_eq!(epoch, 0),
        other => panic!(
            "expected non-finite loss, got {:?}",
            other.map(|o| o.final_loss)
        ),
    }
}

#[test]
fn single_instance_gcn_halves_loss() {
    let inst = generated(20, 18);
    let labels = crate::exact::dreyfus_wagner(&inst).unwrap().tree.nodes();
    let mut y = vec![0u8; inst.n()];
    for v in labels {
        y[v] = 1;
    }
    let init = ModelParams::init(Variant::Gcn, Hyperparams::for_variant(Variant::Gcn, 0), 19);
    let ex = Example::new(&inst, &y, &init).unwrap();
    let out = train_examples(init, &[ex], &TrainConfig::default()).unwrap();
    assert!(
        out.final_loss <= 0.5 * out.initial_loss,
        "{} -> {}",
        out.initial_loss,
        out.final_loss
    );
}

#[test]
fn training_is_deterministic() {
    let insts: Vec<StpInstance> = (0..3).map(|s| generated(12, 100 + s)).collect();
    let run = || {
        let init = ModelParams::init(Variant::Gat, small_hyper(Variant::Gat, 0), 20);
        let examples: Vec<Example> = insts
            .iter()
            .map(|i| Example::new(i, &labels_for(i.n()), &init).unwrap())
            .collect();
        let cfg = TrainConfig {
            epochs: 20,
            seed: 21,
            ..TrainConfig::default()
        };
        train_examples(init, &examples, &cfg).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.final_loss.to_bits(), b.final_loss.to_bits());
    assert_eq!(a.params, b.params);
}

#[test]
fn serialization_round_trip_is_bit_identical() {
    let inst = generated(15, 22);
    for v in Variant::ALL {
        let p = ModelParams::init(v, Hyperparams::for_variant(v, 15), 23);
        let text = model_to_json(&p).unwrap();
        let back = model_from_json(&text).unwrap();
        assert_eq!(back, p);
        let (a, b) = (
            predict_scores(&p, &inst).unwrap(),
            predict_scores(&back, &inst).unwrap(),
        );
        assert!(a
            .0
            .iter()
            .zip(&b.0)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let p = ModelParams::init(Variant::Gcn, small_hyper(Variant::Gcn, 0), 24);
    save_model(&p, &path).unwrap();
    assert_eq!(load_model(&path).unwrap(), p);
}

#[test]
fn loading_rejects_mismatches() {
    let p = ModelParams::init(Variant::Gcn, small_hyper(Variant::Gcn, 0), 25);
    let text = model_to_json(&p).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();

    let mut wrong_version = json.clone();
    wrong_version["version"] = serde_json::json!(MODEL_FORMAT_VERSION + 1);
    assert!(model_from_json(&wrong_version.to_string()).is_err());

    let mut wrong_schema = json.clone();
    wrong_schema["hyper"]["feature_schema"] = serde_json::json!("stp-node-features/v0");
    assert!(matches!(
        model_from_json(&wrong_schema.to_string()),
        Err(Error::SchemaMismatch { .. })
    ));

    let mut wrong_format = json.clone();
    wrong_format["format"] = serde_json::json!("something-else");
    assert!(model_from_json(&wrong_format.to_string()).is_err());

    json["tensors"][0]["value"]["rows"] = serde_json::json!(4);
    assert!(model_from_json(&json.to_string()).is_err());
}

#[test]
fn predict_rejects_schema_mismatch() {
    let mut p = ModelParams::init(Variant::Gcn, small_hyper(Variant::Gcn, 0), 26);
    p.hyper.feature_schema = "other".into();
    assert!(matches!(
        predict_scores(&p, &star_fixture()),
        Err(Error::SchemaMismatch { .. })
    ));
}

#[test]
fn predict_many_matches_single_calls() {
    let insts: Vec<StpInstance> = (0..6)
        .map(|s| generated(10 + s as usize, 200 + s))
        .collect();
    let refs: Vec<&StpInstance> = insts.iter().collect();
    let p = ModelParams::init(Variant::Gat, Hyperparams::for_variant(Variant::Gat, 0), 27);
    let seq = predict_many(&p, &refs, crate::exec::Execution::Sequential).unwrap();
    let par = predict_many(&p, &refs, crate::exec::Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    assert_eq!(seq[2], predict_scores(&p, &insts[2]).unwrap());
}

#[test]
fn fixture_hub_scores_are_probabilities() {
    let inst = star_fixture();
    for v in Variant::ALL {
        let p = ModelParams::init(v, Hyperparams::for_variant(v, 4), 28);
        let s = predict_scores(&p, &inst).unwrap();
        assert_eq!(s.len(), 4);
        assert!((0.0..=1.0).contains(&s.0[D]));
    }
    assert_eq!(sigmoid(0.0), 0.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scores_lie_in_unit_interval(seed in 0u64..1000, n in 6usize..16, v in 0usize..4) {
        let inst = generated(n, seed);
        let variant = Variant::ALL[v];
        let p = ModelParams::init(variant, Hyperparams::for_variant(variant, 16), seed);
        let s = predict_scores(&p, &inst).unwrap();
        prop_assert_eq!(s.len(), n);
        prop_assert!(s.0.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn message_passing_is_permutation_equivariant(seed in 0u64..1000, n in 6usize..14, v in 1usize..4) {
        let inst = generated(n, seed);
        let variant = Variant::ALL[v];
        prop_assert!(variant.is_equivariant());
        let p = ModelParams::init(variant, Hyperparams::for_variant(variant, 0), seed + 1);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let moved = inst.permuted(&perm).unwrap();
        let a = predict_scores(&p, &inst).unwrap();
        let b = predict_scores(&p, &moved).unwrap();
        for u in 0..n {
            prop_assert!((a.0[u] - b.0[perm[u]]).abs() < 1e-9);
        }
    }
}
