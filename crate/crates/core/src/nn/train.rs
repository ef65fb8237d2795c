//! Training loop: generate a fresh scramble batch, forward, backward, Adam,
//! repeat. Data is streamed, never persisted; batch i of a run is seeded
//! from (run seed, step) so runs are reproducible.

use serde::{Deserialize, Serialize};

use super::mat::Scalar;
use super::{ModelBundle, ModelConfig, OutputHead};
use crate::error::{Error, Result};
use crate::puzzle::Puzzle;
use crate::scramble::{derive_seed, generate_batch, LabelMode, ScrambleConfig};

const INIT_SALT: u64 = 0x696e_6974; // distinct stream for weight init

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrSchedule {
    Constant,
    /// Cosine decay from the initial rate to zero over the full run.
    Cosine,
}

#[derive(Clone, Copy, Debug)]
pub struct TrainOptions {
    pub steps: u64,
    pub lr: f64,
    pub schedule: LrSchedule,
    /// Emit a mean-loss point every this many steps.
    pub log_every: u64,
}

impl TrainOptions {
    pub fn lr_at(&self, step: u64) -> f64 {
        match self.schedule {
            LrSchedule::Constant => self.lr,
            LrSchedule::Cosine => {
                let frac = step as f64 / self.steps.max(1) as f64;
                self.lr * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
            }
        }
    }
}

/// Mean training loss/accuracy over the preceding `log_every` window.
#[derive(Clone, Copy, Debug)]
pub struct LossPoint {
    pub step: u64,
    pub loss: f64,
    pub accuracy: f64,
}

fn check_head(config: &ModelConfig, mode: LabelMode) -> Result<()> {
    let ok = matches!(
        (config.head, mode),
        (OutputHead::SoftmaxCategorical, LabelMode::LastMove)
            | (OutputHead::SigmoidMultilabel, LabelMode::MoveMultiset)
    );
    if ok {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "label mode {mode:?} does not match output head {:?}",
            config.head
        )))
    }
}

/// Train a fresh model. The run seed is `scramble.seed`: weight init and
/// every batch derive from it. With `steps == 0` the initialized bundle is
/// returned unchanged.
pub fn train<F: Scalar>(
    puzzle: &Puzzle,
    model: &ModelConfig,
    scramble: &ScrambleConfig,
    opts: &TrainOptions,
) -> Result<(ModelBundle<F>, Vec<LossPoint>)> {
    check_head(model, scramble.label_mode)?;
    scramble.validate(puzzle)?;
    if model.input_dim != puzzle.encoding_dim() || model.output_dim != puzzle.move_count() {
        return Err(Error::ShapeMismatch(format!(
            "model is {}x{} but the puzzle needs {}x{}",
            model.input_dim,
            model.output_dim,
            puzzle.encoding_dim(),
            puzzle.move_count()
        )));
    }

    let mut bundle = ModelBundle::<F>::init(model, derive_seed(scramble.seed, INIT_SALT))?;
    bundle.seed = scramble.seed;
    let mut curve = Vec::new();
    let mut window_loss = 0.0f64;
    let mut window_acc = 0.0f64;
    let mut window_len = 0u64;

    for step in 0..opts.steps {
        let cfg = ScrambleConfig { seed: derive_seed(scramble.seed, step), ..*scramble };
        let batch = generate_batch::<F>(puzzle, &cfg)?;
        let tape = bundle.forward_train(&batch.inputs)?;
        let (grads, report) = bundle.backward(&tape, &batch.labels)?;
        drop(tape);
        bundle.adam_step(&grads, opts.lr_at(step))?;

        window_loss += report.cross_entropy;
        window_acc += report.accuracy;
        window_len += 1;
        if (step + 1) % opts.log_every.max(1) == 0 || step + 1 == opts.steps {
            curve.push(LossPoint {
                step: step + 1,
                loss: window_loss / window_len as f64,
                accuracy: window_acc / window_len as f64,
            });
            window_loss = 0.0;
            window_acc = 0.0;
            window_len = 0;
        }
    }
    Ok((bundle, curve))
}

/// Mean eval-mode cross-entropy over freshly generated held-out batches
/// drawn from a dedicated seed stream.
pub fn validation_loss<F: Scalar>(
    bundle: &ModelBundle<F>,
    puzzle: &Puzzle,
    scramble: &ScrambleConfig,
    batches: usize,
    seed: u64,
) -> Result<f64> {
    let mut total = 0.0f64;
    for k in 0..batches {
        let cfg = ScrambleConfig { seed: derive_seed(seed, k as u64), ..*scramble };
        let batch = generate_batch::<F>(puzzle, &cfg)?;
        let logits = bundle.forward_eval(&batch.inputs)?;
        let report = bundle.loss_report(&logits, &batch.labels)?;
        total += report.cross_entropy;
    }
    Ok(total / batches.max(1) as f64)
}
