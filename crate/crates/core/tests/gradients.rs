//! Finite-difference gradient checks at 64-bit precision: analytic
//! backprop must match central differences on every parameter, covering
//! linear layers, batch norm, residual connections, and both output heads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use unscramble_core::nn::{
    BodyShape, Labels, Mat, ModelBundle, ModelConfig, OutputHead,
};

const FD_STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn random_batch(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat<f64> {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen::<f64>()).collect();
    Mat::from_vec(rows, cols, data)
}

fn loss_of(bundle: &ModelBundle<f64>, inputs: &Mat<f64>, labels: &Labels<f64>) -> f64 {
    let mut b = bundle.clone();
    let tape = b.forward_train(inputs).unwrap();
    b.loss_report(tape.logits(), labels).unwrap().cross_entropy
}

/// Mutable view of trainable tensor `t` in canonical order.
fn tensor_mut(bundle: &mut ModelBundle<f64>, t: usize) -> &mut [f64] {
    let lin_tensors = bundle.linears.len() * 2;
    if t < lin_tensors {
        let lin = &mut bundle.linears[t / 2];
        if t % 2 == 0 {
            &mut lin.weight
        } else {
            &mut lin.bias
        }
    } else {
        let bt = t - lin_tensors;
        let bn = &mut bundle.bns[bt / 2];
        if bt % 2 == 0 {
            &mut bn.gamma
        } else {
            &mut bn.beta
        }
    }
}

fn check_gradients(config: ModelConfig, labels_of: impl Fn(&mut ChaCha8Rng, usize, usize) -> Labels<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xfd);
    let batch = 4;
    let bundle = ModelBundle::<f64>::init(&config, 99).unwrap();
    let inputs = random_batch(&mut rng, batch, config.input_dim);
    let labels = labels_of(&mut rng, batch, config.output_dim);

    let mut base = bundle.clone();
    let tape = base.forward_train(&inputs).unwrap();
    let (grads, _) = base.backward(&tape, &labels).unwrap();

    let mut worst = 0.0f64;
    for t in 0..grads.tensors.len() {
        for i in 0..grads.tensors[t].len() {
            let mut plus = bundle.clone();
            tensor_mut(&mut plus, t)[i] += FD_STEP;
            let mut minus = bundle.clone();
            tensor_mut(&mut minus, t)[i] -= FD_STEP;
            let numeric = (loss_of(&plus, &inputs, &labels) - loss_of(&minus, &inputs, &labels))
                / (2.0 * FD_STEP);
            let analytic = grads.tensors[t][i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            assert!(
                rel < TOL,
                "tensor {t} elem {i}: analytic {analytic:.9e} vs numeric {numeric:.9e} (rel {rel:.3e})"
            );
        }
    }
    eprintln!("max relative error {worst:.3e} over {} tensors", grads.tensors.len());
}

fn class_labels(rng: &mut ChaCha8Rng, batch: usize, out: usize) -> Labels<f64> {
    Labels::Classes((0..batch).map(|_| rng.gen_range(0..out as u32)).collect())
}

fn bit_labels(rng: &mut ChaCha8Rng, batch: usize, out: usize) -> Labels<f64> {
    let data: Vec<f64> = (0..batch * out).map(|_| f64::from(rng.gen_bool(0.5))).collect();
    Labels::Bits(Mat::from_vec(batch, out, data))
}

#[test]
fn residual_batchnorm_categorical() {
    let config = ModelConfig {
        input_dim: 12,
        body: BodyShape::Residual { first: 10, second: 8, blocks: 2 },
        output_dim: 5,
        head: OutputHead::SoftmaxCategorical,
        batch_norm: true,
    };
    check_gradients(config, class_labels);
}

#[test]
fn residual_no_batchnorm_categorical() {
    let config = ModelConfig {
        input_dim: 12,
        body: BodyShape::Residual { first: 10, second: 8, blocks: 1 },
        output_dim: 5,
        head: OutputHead::SoftmaxCategorical,
        batch_norm: false,
    };
    check_gradients(config, class_labels);
}

#[test]
fn uniform_batchnorm_multilabel() {
    let config = ModelConfig {
        input_dim: 12,
        body: BodyShape::Uniform { depth: 2, width: 8 },
        output_dim: 6,
        head: OutputHead::SigmoidMultilabel,
        batch_norm: true,
    };
    check_gradients(config, bit_labels);
}

#[test]
fn uniform_batchnorm_categorical() {
    let config = ModelConfig {
        input_dim: 9,
        body: BodyShape::Uniform { depth: 3, width: 7 },
        output_dim: 4,
        head: OutputHead::SoftmaxCategorical,
        batch_norm: true,
    };
    check_gradients(config, class_labels);
}
