//! Node-scoring models: a feedforward baseline and three message-passing
//! networks (recurrent diffusion, graph convolution, graph attention), all
//! built on the small dense kernel in [`tensor`] and differentiated by [`tape`].

mod arch;
mod context;
mod io;
pub mod tape;
pub mod tensor;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use arch::{
    ff_encoding, forward, gat_attention, gcn_layer, gnn_diffusion, normalized_adjacency,
    AttentionOutput, DiffusionOutput, Forward, Mode,
};
pub use context::GraphContext;
pub use io::{
    load_model, model_from_json, model_to_json, save_model, MODEL_FORMAT, MODEL_FORMAT_VERSION,
};
pub use tensor::Matrix;
pub use train::{
    evaluate_loss, loss, loss_and_gradient, train, train_examples, Adam, Example, TrainConfig,
    TrainOutcome,
};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::features::{FEATURE_SCHEMA, FEATURE_WIDTH};
use crate::graph::StpInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Ff,
    Gnn,
    Gcn,
    Gat,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Ff, Variant::Gnn, Variant::Gcn, Variant::Gat];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Ff => "ff",
            Variant::Gnn => "gnn",
            Variant::Gcn => "gcn",
            Variant::Gat => "gat",
        }
    }

    /// Whether relabeling nodes permutes the scores identically.
    pub fn is_equivariant(self) -> bool {
        self != Variant::Ff
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ff" => Ok(Variant::Ff),
            "gnn" => Ok(Variant::Gnn),
            "gcn" => Ok(Variant::Gcn),
            "gat" => Ok(Variant::Gat),
            other => Err(Error::Model(format!("unknown model variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Hidden width: FF 100, GNN transition/output MLPs 40, GCN/GAT 128.
    pub hidden: usize,
    /// GNN state dimension.
    pub state_dim: usize,
    /// Dropout on hidden layers during training.
    pub dropout: f64,
    /// FF only: padded graph size.
    pub n_max: usize,
    pub gnn_tolerance: f64,
    pub gnn_max_iterations: usize,
    pub feature_schema: String,
}

impl Hyperparams {
    pub fn for_variant(variant: Variant, n_max: usize) -> Self {
        let base = Hyperparams {
            hidden: 128,
            state_dim: 5,
            dropout: 0.0,
            n_max: 0,
            gnn_tolerance: 1e-4,
            gnn_max_iterations: 50,
            feature_schema: FEATURE_SCHEMA.to_string(),
        };
        match variant {
            Variant::Ff => Hyperparams {
                hidden: 100,
                n_max,
                ..base
            },
            Variant::Gnn => Hyperparams { hidden: 40, ..base },
            Variant::Gcn | Variant::Gat => Hyperparams {
                dropout: 0.5,
                ..base
            },
        }
    }

    /// Width of the FF input: pair indicators plus terminal indicators.
    pub fn ff_input_width(&self) -> usize {
        self.n_max * (self.n_max.saturating_sub(1)) / 2 + self.n_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub value: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub variant: Variant,
    pub hyper: Hyperparams,
    pub tensors: Vec<NamedTensor>,
    pub init_seed: u64,
}

impl ModelParams {
    /// Glorot-uniform weights and zero biases.
    pub fn init(variant: Variant, hyper: Hyperparams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = layout(variant, &hyper)
            .into_iter()
            .map(|(name, rows, cols, is_bias)| {
                let value = if is_bias {
                    Matrix::zeros(rows, cols)
                } else {
                    let limit = (6.0 / (rows + cols) as f64).sqrt();
                    Matrix::from_vec(
                        rows,
                        cols,
                        (0..rows * cols)
                            .map(|_| rng.gen_range(-limit..=limit))
                            .collect(),
                    )
                };
                NamedTensor {
                    name: name.to_string(),
                    value,
                }
            })
            .collect();
        ModelParams {
            variant,
            hyper,
            tensors,
            init_seed: seed,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|t| t.value.data.len()).sum()
    }

    pub fn tensor(&self, name: &str) -> Option<&Matrix> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .map(|t| &t.value)
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.tensors
            .iter_mut()
            .find(|t| t.name == name)
            .map(|t| &mut t.value)
    }

    /// Checks names, shapes and finiteness against the variant's layout.
    pub fn validate(&self) -> Result<()> {
        let expected = layout(self.variant, &self.hyper);
        if expected.len() != self.tensors.len() {
            return Err(Error::Model(format!(
                "{} model needs {} tensors, found {}",
                self.variant,
                expected.len(),
                self.tensors.len()
            )));
        }
        for ((name, rows, cols, _), t) in expected.iter().zip(&self.tensors) {
            if t.name != *name || t.value.shape() != (*rows, *cols) {
                return Err(Error::Model(format!(
                    "tensor {} has shape {:?}, expected {name} {:?}",
                    t.name,
                    t.value.shape(),
                    (rows, cols)
                )));
            }
            if t.value.data.len() != rows * cols || !t.value.is_finite() {
                return Err(Error::Model(format!("tensor {name} is malformed")));
            }
        }
        Ok(())
    }
}

/// `(name, rows, cols, is_bias)` for every tensor, in order.
fn layout(variant: Variant, h: &Hyperparams) -> Vec<(&'static str, usize, usize, bool)> {
    let f = FEATURE_WIDTH;
    let d = h.hidden;
    let mlp_head = [
        ("head1.w", d, d, false),
        ("head1.b", 1, d, true),
        ("head2.w", d, d, false),
        ("head2.b", 1, d, true),
        ("out.w", d, 1, false),
        ("out.b", 1, 1, true),
    ];
    match variant {
        Variant::Ff => vec![
            ("fc1.w", h.ff_input_width(), d, false),
            ("fc1.b", 1, d, true),
            ("fc2.w", d, d, false),
            ("fc2.b", 1, d, true),
            ("out.w", d, h.n_max, false),
            ("out.b", 1, h.n_max, true),
        ],
        Variant::Gnn => {
            let s = h.state_dim;
            vec![
                ("transition.w1", 2 * f + 1 + s, d, false),
                ("transition.b1", 1, d, true),
                ("transition.w2", d, s, false),
                ("transition.b2", 1, s, true),
                ("output.w1", s + f, d, false),
                ("output.b1", 1, d, true),
                ("output.w2", d, 1, false),
                ("output.b2", 1, 1, true),
            ]
        }
        Variant::Gcn => {
            let mut v = vec![
                ("conv1.self", f, d, false),
                ("conv1.w", f, d, false),
                ("conv1.b", 1, d, true),
                ("conv2.self", d, d, false),
                ("conv2.w", d, d, false),
                ("conv2.b", 1, d, true),
            ];
            v.extend(mlp_head);
            v
        }
        Variant::Gat => {
            let mut v = vec![
                ("att1.w", f, d, false),
                ("att1.b", 1, d, true),
                ("att1.src", d, 1, false),
                ("att1.dst", d, 1, false),
                ("att2.w", d, d, false),
                ("att2.b", 1, d, true),
                ("att2.src", d, 1, false),
                ("att2.dst", d, 1, false),
            ];
            v.extend(mlp_head);
            v
        }
    }
}

/// Per-node probability of belonging to an optimal tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(pub Vec<f64>);

impl ScoreVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Inference with dropout disabled.
pub fn predict_scores(params: &ModelParams, instance: &StpInstance) -> Result<ScoreVector> {
    if params.hyper.feature_schema != FEATURE_SCHEMA {
        return Err(Error::SchemaMismatch {
            expected: params.hyper.feature_schema.clone(),
            found: FEATURE_SCHEMA.to_string(),
        });
    }
    let ctx = GraphContext::build(instance, params)?;
    let out = forward(params, &ctx, Mode::Eval, None)?;
    Ok(ScoreVector(out.scores()))
}

/// Scores many instances; order follows the input.
pub fn predict_many(
    params: &ModelParams,
    instances: &[&StpInstance],
    exec: Execution,
) -> Result<Vec<ScoreVector>> {
    exec.map(instances, |inst| predict_scores(params, inst))
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests;
