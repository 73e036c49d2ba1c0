//! Adam training on per-node binary cross-entropy, one step per instance.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::arch::{forward, Mode};
use super::context::GraphContext;
use super::tensor::Matrix;
use super::{Hyperparams, ModelParams, Variant};
use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::StpInstance;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Seeds initialization, visiting order and dropout masks.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 500,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Longer schedule used for corpora mixing several generators.
    pub fn mixed_generators() -> Self {
        TrainConfig {
            epochs: 1000,
            ..TrainConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Model("epochs must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Model(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// One labeled instance, preprocessed for a particular model.
#[derive(Debug, Clone)]
pub struct Example {
    pub context: GraphContext,
    pub labels: Vec<f64>,
}

impl Example {
    pub fn new(instance: &StpInstance, labels: &[u8], params: &ModelParams) -> Result<Self> {
        if labels.len() != instance.n() {
            return Err(Error::Model(format!(
                "instance {} has {} nodes but {} labels",
                instance.id,
                instance.n(),
                labels.len()
            )));
        }
        Ok(Example {
            context: GraphContext::build(instance, params)?,
            labels: labels.iter().map(|&l| f64::from(l)).collect(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Mean training loss of each epoch, dropout active.
    pub loss_curve: Vec<f64>,
    /// Mean loss over the examples before the first step, dropout off.
    pub initial_loss: f64,
    /// Mean loss over the examples after the last epoch, dropout off.
    pub final_loss: f64,
}

pub struct Adam {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &ModelParams, config: &TrainConfig) -> Self {
        let zeros = || {
            params
                .tensors
                .iter()
                .map(|t| vec![0.0; t.value.data.len()])
                .collect()
        };
        Adam {
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &[Matrix], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (k, (t, g)) in params.tensors.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..g.data.len() {
                let gi = g.data[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                t.value.data[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}

/// Loss and gradient of every tensor on one example.
pub fn loss_and_gradient(
    params: &ModelParams,
    example: &Example,
    mode: Mode<'_>,
    gnn_iterations: Option<usize>,
) -> Result<(f64, Vec<Matrix>)> {
    let fwd = forward(params, &example.context, mode, gnn_iterations)?;
    let mut tape = fwd.tape;
    let loss = tape.bce_with_logits(fwd.logits, example.labels.clone());
    let value = tape.value(loss).data[0];
    let grads = tape
        .backward(loss, params.tensors.len())
        .into_iter()
        .zip(&params.tensors)
        .map(|(g, t)| g.unwrap_or_else(|| Matrix::zeros(t.value.rows, t.value.cols)))
        .collect();
    Ok((value, grads))
}

/// Loss alone, skipping the backward pass.
pub fn loss(
    params: &ModelParams,
    example: &Example,
    mode: Mode<'_>,
    gnn_iterations: Option<usize>,
) -> Result<f64> {
    let fwd = forward(params, &example.context, mode, gnn_iterations)?;
    let mut tape = fwd.tape;
    let loss = tape.bce_with_logits(fwd.logits, example.labels.clone());
    Ok(tape.value(loss).data[0])
}

/// Mean loss with dropout disabled.
pub fn evaluate_loss(params: &ModelParams, examples: &[Example]) -> Result<f64> {
    let mut total = 0.0;
    for ex in examples {
        total += loss(params, ex, Mode::Eval, None)?;
    }
    Ok(total / examples.len().max(1) as f64)
}

pub fn train_examples(
    init: ModelParams,
    examples: &[Example],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::Model("no training examples".into()));
    }
    let mut params = init;
    let initial_loss = evaluate_loss(&params, examples)?;
    let mut adam = Adam::new(&params, config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut loss_curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let (loss, grads) =
                loss_and_gradient(&params, &examples[i], Mode::Train(&mut rng), None)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            total += loss;
            adam.step(&mut params, &grads, config.learning_rate);
        }
        let mean = total / examples.len() as f64;
        log::debug!("{} epoch {epoch}: loss {mean:.6}", params.variant);
        loss_curve.push(mean);
    }
    let final_loss = evaluate_loss(&params, examples)?;
    Ok(TrainOutcome {
        params,
        loss_curve,
        initial_loss,
        final_loss,
    })
}

/// Trains on the labeled training split of `dataset`.
pub fn train(variant: Variant, dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    let n_max = dataset
        .entries
        .iter()
        .map(|e| e.instance.n())
        .max()
        .unwrap_or(0);
    let init = ModelParams::init(
        variant,
        Hyperparams::for_variant(variant, n_max),
        config.seed,
    );
    let chosen: Vec<_> = dataset
        .entries
        .iter()
        .filter(|e| e.split == Split::Train)
        .filter_map(|e| e.labels.as_ref().map(|l| (&e.instance, l)))
        .collect();
    let examples: Vec<Example> = Execution::default()
        .map(&chosen, |(inst, labels)| Example::new(inst, labels, &init))
        .into_iter()
        .collect::<Result<_>>()?;
    train_examples(init, &examples, config)
}
