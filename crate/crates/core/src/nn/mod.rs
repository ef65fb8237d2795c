//! From-scratch dense network: forward, backward, Adam, and parameter/FLOP
//! accounting. Two body shapes are supported: the residual shape (two wide
//! layers followed by residual blocks) and a uniform-width plain MLP used by
//! the scaling experiments. ReLU and batch normalization follow each hidden
//! linear layer; the output head is either softmax-categorical or
//! sigmoid-multilabel.

mod adam;
mod checkpoint;
mod mat;
mod network;
mod train;

pub use adam::AdamState;
pub use checkpoint::{encode_states, load_checkpoint, save_checkpoint, CheckpointMeta};
pub use mat::{Mat, Scalar};
pub use network::{BnParams, Gradients, LinearParams, ModelBundle, Tape};
pub use train::{train, validation_loss, LossPoint, LrSchedule, TrainOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden-body layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BodyShape {
    /// Two leading linear layers (`first`, `second` wide) followed by
    /// `blocks` residual blocks of two `second`-wide layers each.
    Residual { first: usize, second: usize, blocks: usize },
    /// `depth` hidden layers of `width` units, no residual connections.
    Uniform { depth: usize, width: usize },
}

/// Output activation / loss pairing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputHead {
    /// Softmax over moves with categorical cross-entropy.
    SoftmaxCategorical,
    /// Independent sigmoids with per-output binary cross-entropy,
    /// averaged over outputs.
    SigmoidMultilabel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub body: BodyShape,
    pub output_dim: usize,
    pub head: OutputHead,
    /// Batch normalization after each hidden linear layer.
    pub batch_norm: bool,
}

impl ModelConfig {
    /// The reference architecture: 5000-D and 1000-D linear layers followed
    /// by four residual blocks of two 1000-D layers.
    pub fn paper_shape(input_dim: usize, output_dim: usize, head: OutputHead) -> Self {
        ModelConfig {
            input_dim,
            body: BodyShape::Residual { first: 5000, second: 1000, blocks: 4 },
            output_dim,
            head,
            batch_norm: true,
        }
    }

    pub fn uniform(input_dim: usize, width: usize, depth: usize, output_dim: usize, head: OutputHead) -> Self {
        ModelConfig {
            input_dim,
            body: BodyShape::Uniform { depth, width },
            output_dim,
            head,
            batch_norm: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.input_dim >= 1
            && self.output_dim >= 1
            && match self.body {
                BodyShape::Residual { first, second, .. } => first >= 1 && second >= 1,
                BodyShape::Uniform { depth, width } => depth >= 1 && width >= 1,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!("invalid model config {self:?}")))
        }
    }

    /// (in, out) dims of every linear layer, body then head.
    pub fn linear_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        match self.body {
            BodyShape::Residual { first, second, blocks } => {
                dims.push((self.input_dim, first));
                dims.push((first, second));
                for _ in 0..blocks {
                    dims.push((second, second));
                    dims.push((second, second));
                }
                dims.push((second, self.output_dim));
            }
            BodyShape::Uniform { depth, width } => {
                dims.push((self.input_dim, width));
                for _ in 1..depth {
                    dims.push((width, width));
                }
                dims.push((width, self.output_dim));
            }
        }
        dims
    }
}

/// Exact trainable parameter count: weights, biases, and batch-norm
/// gamma/beta (running statistics are not trained).
pub fn count_params(config: &ModelConfig) -> u64 {
    let mut count = 0u64;
    for (i, o) in config.linear_dims() {
        count += (i * o + o) as u64;
    }
    if config.batch_norm {
        // One BN per hidden linear layer (none on the head).
        let hidden = config.linear_dims().len() - 1;
        let bn_dims: u64 = config
            .linear_dims()
            .iter()
            .take(hidden)
            .map(|&(_, o)| o as u64)
            .sum();
        count += 2 * bn_dims;
    }
    count
}

/// Training compute in FLOPs under the dense-layer approximation C = 3 N D,
/// where D counts training states seen.
pub fn count_compute(config: &ModelConfig, states_seen: f64) -> f64 {
    3.0 * count_params(config) as f64 * states_seen
}

/// Training targets for one batch.
#[derive(Clone, Debug)]
pub enum Labels<F: Scalar> {
    /// Class index per example.
    Classes(Vec<u32>),
    /// (batch x outputs) binary targets.
    Bits(Mat<F>),
}

impl<F: Scalar> Labels<F> {
    pub fn len(&self) -> usize {
        match self {
            Labels::Classes(v) => v.len(),
            Labels::Bits(m) => m.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Mean loss (nats per example) and argmax / thresholded accuracy.
#[derive(Clone, Copy, Debug)]
pub struct LossReport {
    pub cross_entropy: f64,
    pub accuracy: f64,
}
