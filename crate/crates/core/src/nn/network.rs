//! Network execution: parameter storage, seeded initialization, train/eval
//! forward passes, and backpropagation.
//!
//! The body is compiled into a flat op list (linear, batch norm, ReLU, and
//! skip save/add markers for residual blocks), so both body shapes and both
//! precisions share one code path. All parallel reductions run in a fixed
//! order: a given seed reproduces a run bit-for-bit on a given build.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adam::AdamState;
use super::mat::{axpy, dot, Mat, Scalar};
use super::{BodyShape, Labels, LossReport, ModelConfig, OutputHead};
use crate::error::{Error, Result};

pub(crate) const BN_EPS: f64 = 1e-5;
pub(crate) const BN_MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Op {
    Linear(usize),
    BatchNorm(usize),
    Relu,
    SaveSkip,
    AddSkip,
}

pub(crate) fn build_ops(config: &ModelConfig) -> Vec<Op> {
    let mut ops = Vec::new();
    let mut lin = 0usize;
    let mut bn = 0usize;
    let hidden = |ops: &mut Vec<Op>, lin: &mut usize, bn: &mut usize| {
        ops.push(Op::Linear(*lin));
        *lin += 1;
        if config.batch_norm {
            ops.push(Op::BatchNorm(*bn));
            *bn += 1;
        }
    };
    match config.body {
        BodyShape::Residual { blocks, .. } => {
            hidden(&mut ops, &mut lin, &mut bn);
            ops.push(Op::Relu);
            hidden(&mut ops, &mut lin, &mut bn);
            ops.push(Op::Relu);
            for _ in 0..blocks {
                ops.push(Op::SaveSkip);
                hidden(&mut ops, &mut lin, &mut bn);
                ops.push(Op::Relu);
                hidden(&mut ops, &mut lin, &mut bn);
                ops.push(Op::AddSkip);
                ops.push(Op::Relu);
            }
        }
        BodyShape::Uniform { depth, .. } => {
            for _ in 0..depth {
                hidden(&mut ops, &mut lin, &mut bn);
                ops.push(Op::Relu);
            }
        }
    }
    ops.push(Op::Linear(lin)); // output head, no BN / ReLU
    ops
}

#[derive(Clone, Debug)]
pub struct LinearParams<F> {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major (out_dim x in_dim).
    pub weight: Vec<F>,
    pub bias: Vec<F>,
}

#[derive(Clone, Debug)]
pub struct BnParams<F> {
    pub dim: usize,
    pub gamma: Vec<F>,
    pub beta: Vec<F>,
    pub running_mean: Vec<F>,
    pub running_var: Vec<F>,
}

/// Gradient tensors in canonical order: every linear's (weight, bias), then
/// every batch norm's (gamma, beta).
#[derive(Clone, Debug)]
pub struct Gradients<F> {
    pub tensors: Vec<Vec<F>>,
}

/// Trainable tensor names in canonical order.
pub(crate) fn tensor_names(config: &ModelConfig) -> Vec<String> {
    let dims = config.linear_dims();
    let mut names = Vec::new();
    for i in 0..dims.len() {
        names.push(format!("linear{i}.weight"));
        names.push(format!("linear{i}.bias"));
    }
    if config.batch_norm {
        for j in 0..dims.len() - 1 {
            names.push(format!("bn{j}.gamma"));
            names.push(format!("bn{j}.beta"));
        }
    }
    names
}

/// Model parameters, batch-norm running statistics, optimizer moments, and
/// the architecture config they belong to.
#[derive(Clone, Debug)]
pub struct ModelBundle<F: Scalar> {
    pub config: ModelConfig,
    pub linears: Vec<LinearParams<F>>,
    pub bns: Vec<BnParams<F>>,
    pub adam: AdamState<F>,
    pub step: u64,
    pub seed: u64,
    pub(crate) ops: Vec<Op>,
}

struct BnCache<F> {
    inv_std: Vec<F>,
    xhat: Mat<F>,
}

/// Activations cached by a train-mode forward pass, consumed by `backward`.
pub struct Tape<F: Scalar> {
    /// acts[0] is the input; acts[k + 1] is the output of op k.
    acts: Vec<Mat<F>>,
    bn: Vec<BnCache<F>>,
}

impl<F: Scalar> Tape<F> {
    pub fn logits(&self) -> &Mat<F> {
        self.acts.last().expect("tape holds at least the input")
    }
}

impl<F: Scalar> ModelBundle<F> {
    /// He fan-in initialization for hidden weights, zero biases, unit
    /// batch-norm scale, zero optimizer moments. The output head is scaled
    /// down so untrained predictions start uniform (chance-level loss).
    /// Deterministic per seed.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = config.linear_dims();
        let mut linears = Vec::with_capacity(dims.len());
        for (li, &(in_dim, out_dim)) in dims.iter().enumerate() {
            let head_scale = if li == dims.len() - 1 { 1e-2 } else { 1.0 };
            let std = head_scale * (2.0 / in_dim as f64).sqrt();
            let weight = (0..in_dim * out_dim)
                .map(|_| F::from_f64(normal(&mut rng) * std))
                .collect();
            linears.push(LinearParams {
                in_dim,
                out_dim,
                weight,
                bias: vec![F::zero(); out_dim],
            });
        }
        let bns = if config.batch_norm {
            dims[..dims.len() - 1]
                .iter()
                .map(|&(_, d)| BnParams {
                    dim: d,
                    gamma: vec![F::one(); d],
                    beta: vec![F::zero(); d],
                    running_mean: vec![F::zero(); d],
                    running_var: vec![F::one(); d],
                })
                .collect()
        } else {
            Vec::new()
        };
        let adam = AdamState::zeros_like(&linears, &bns);
        Ok(ModelBundle {
            config: *config,
            linears,
            bns,
            adam,
            step: 0,
            seed,
            ops: build_ops(config),
        })
    }

    pub fn param_count(&self) -> u64 {
        super::count_params(&self.config)
    }

    /// Train-mode forward: batch statistics, running-stat updates, and a
    /// tape of activations for `backward`.
    pub fn forward_train(&mut self, input: &Mat<F>) -> Result<Tape<F>> {
        self.check_input(input)?;
        if input.rows() < 2 {
            return Err(Error::BatchTooSmall(input.rows()));
        }
        let mut acts: Vec<Mat<F>> = Vec::with_capacity(self.ops.len() + 1);
        acts.push(input.clone());
        let mut bn_caches = Vec::new();
        let mut skip_start: Option<usize> = None;
        let ops = self.ops.clone();
        for op in ops {
            let cur = acts.last().unwrap();
            let next = match op {
                Op::Linear(i) => linear_forward(&self.linears[i], cur),
                Op::BatchNorm(i) => {
                    let (out, cache) = bn_forward_train(&mut self.bns[i], cur);
                    bn_caches.push(cache);
                    out
                }
                Op::Relu => relu(cur),
                Op::SaveSkip => {
                    skip_start = Some(acts.len() - 1);
                    cur.clone()
                }
                Op::AddSkip => {
                    let saved = &acts[skip_start.expect("AddSkip follows SaveSkip")];
                    add(cur, saved)
                }
            };
            acts.push(next);
        }
        Ok(Tape { acts, bn: bn_caches })
    }

    /// Eval-mode forward: running statistics only; a pure function of
    /// (bundle, inputs).
    pub fn forward_eval(&self, input: &Mat<F>) -> Result<Mat<F>> {
        self.check_input(input)?;
        let mut cur = input.clone();
        let mut saved: Option<Mat<F>> = None;
        for &op in &self.ops {
            cur = match op {
                Op::Linear(i) => linear_forward(&self.linears[i], &cur),
                Op::BatchNorm(i) => bn_forward_eval(&self.bns[i], &cur),
                Op::Relu => relu(&cur),
                Op::SaveSkip => {
                    saved = Some(cur.clone());
                    cur
                }
                Op::AddSkip => add(&cur, saved.as_ref().expect("AddSkip follows SaveSkip")),
            };
        }
        Ok(cur)
    }

    /// Backpropagate through the taped forward pass. Returns gradients of
    /// the mean loss for every trainable tensor.
    pub fn backward(&self, tape: &Tape<F>, labels: &Labels<F>) -> Result<(Gradients<F>, LossReport)> {
        let logits = tape.logits();
        let (mut grad, report) = head_loss_and_grad(self.config.head, logits, labels, true)?;
        let mut grad = grad.take().expect("gradient requested");

        let mut grads = Gradients {
            tensors: {
                let mut ts: Vec<Vec<F>> = Vec::new();
                for lin in &self.linears {
                    ts.push(vec![F::zero(); lin.weight.len()]);
                    ts.push(vec![F::zero(); lin.bias.len()]);
                }
                for bn in &self.bns {
                    ts.push(vec![F::zero(); bn.dim]);
                    ts.push(vec![F::zero(); bn.dim]);
                }
                ts
            },
        };
        let lin_count = self.linears.len();
        let mut bn_iter = tape.bn.len();
        let mut pending_skip: Option<Mat<F>> = None;

        for (k, &op) in self.ops.iter().enumerate().rev() {
            let op_input = &tape.acts[k];
            let op_output = &tape.acts[k + 1];
            grad = match op {
                Op::Linear(i) => {
                    let (dw, rest) = grads.tensors[2 * i..].split_first_mut().unwrap();
                    let db = &mut rest[0];
                    linear_backward(&self.linears[i], op_input, &grad, dw, db)
                }
                Op::BatchNorm(i) => {
                    bn_iter -= 1;
                    let base = 2 * lin_count + 2 * i;
                    let (dgamma, rest) = grads.tensors[base..].split_first_mut().unwrap();
                    let dbeta = &mut rest[0];
                    bn_backward(&self.bns[i], &tape.bn[bn_iter], &grad, dgamma, dbeta)
                }
                Op::Relu => relu_backward(&grad, op_output),
                Op::SaveSkip => {
                    let mut g = grad;
                    if let Some(p) = pending_skip.take() {
                        add_assign(&mut g, &p);
                    }
                    g
                }
                Op::AddSkip => {
                    pending_skip = Some(grad.clone());
                    grad
                }
            };
        }
        debug_assert_eq!(bn_iter, 0);
        Ok((grads, report))
    }

    /// Loss and accuracy of `logits` against `labels`, without gradients.
    pub fn loss_report(&self, logits: &Mat<F>, labels: &Labels<F>) -> Result<LossReport> {
        let (_, report) = head_loss_and_grad(self.config.head, logits, labels, false)?;
        Ok(report)
    }

    fn check_input(&self, input: &Mat<F>) -> Result<()> {
        if input.cols() != self.config.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "input has {} columns, model expects {}",
                input.cols(),
                self.config.input_dim
            )));
        }
        Ok(())
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u1 in (0, 1].
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn linear_forward<F: Scalar>(lin: &LinearParams<F>, x: &Mat<F>) -> Mat<F> {
    debug_assert_eq!(x.cols(), lin.in_dim);
    let mut out = Mat::zeros(x.rows(), lin.out_dim);
    let in_dim = lin.in_dim;
    out.data_mut()
        .par_chunks_mut(lin.out_dim)
        .enumerate()
        .for_each(|(b, out_row)| {
            let x_row = x.row(b);
            for (j, o) in out_row.iter_mut().enumerate() {
                *o = dot(&lin.weight[j * in_dim..(j + 1) * in_dim], x_row) + lin.bias[j];
            }
        });
    out
}

/// Computes dW, db and returns the gradient w.r.t. the layer input.
fn linear_backward<F: Scalar>(
    lin: &LinearParams<F>,
    x: &Mat<F>,
    g: &Mat<F>,
    dw: &mut [F],
    db: &mut [F],
) -> Mat<F> {
    let batch = x.rows();
    let in_dim = lin.in_dim;
    let out_dim = lin.out_dim;

    // dW[j] = sum_b g[b][j] * x[b]; db[j] = sum_b g[b][j].
    dw.par_chunks_mut(in_dim)
        .zip(db.par_iter_mut())
        .enumerate()
        .for_each(|(j, (dw_row, db_j))| {
            for b in 0..batch {
                let gj = g.row(b)[j];
                if gj != F::zero() {
                    axpy(dw_row, gj, x.row(b));
                }
                *db_j = *db_j + gj;
            }
        });

    // dX[b] = sum_j g[b][j] * W[j].
    let mut gin = Mat::zeros(batch, in_dim);
    gin.data_mut()
        .par_chunks_mut(in_dim)
        .enumerate()
        .for_each(|(b, gin_row)| {
            let g_row = g.row(b);
            for j in 0..out_dim {
                let gj = g_row[j];
                if gj != F::zero() {
                    axpy(gin_row, gj, &lin.weight[j * in_dim..(j + 1) * in_dim]);
                }
            }
        });
    gin
}

fn bn_forward_train<F: Scalar>(bn: &mut BnParams<F>, x: &Mat<F>) -> (Mat<F>, BnCache<F>) {
    let batch = x.rows();
    let dim = bn.dim;
    debug_assert_eq!(x.cols(), dim);
    let bf = F::from_f64(batch as f64);
    let eps = F::from_f64(BN_EPS);

    // Per-feature batch statistics, each feature summed in row order.
    let mut mean = vec![F::zero(); dim];
    let mut var = vec![F::zero(); dim];
    mean.par_iter_mut()
        .zip(var.par_iter_mut())
        .enumerate()
        .for_each(|(j, (mean_j, var_j))| {
            let mut s = F::zero();
            for b in 0..batch {
                s = s + x.row(b)[j];
            }
            let mu = s / bf;
            let mut v = F::zero();
            for b in 0..batch {
                let d = x.row(b)[j] - mu;
                v = v + d * d;
            }
            *mean_j = mu;
            *var_j = v / bf;
        });

    let inv_std: Vec<F> = var.iter().map(|&v| F::one() / (v + eps).sqrt()).collect();

    let mut xhat = Mat::zeros(batch, dim);
    let mut out = Mat::zeros(batch, dim);
    xhat.data_mut()
        .par_chunks_mut(dim)
        .zip(out.data_mut().par_chunks_mut(dim))
        .enumerate()
        .for_each(|(b, (xh_row, out_row))| {
            let x_row = x.row(b);
            for j in 0..dim {
                let xh = (x_row[j] - mean[j]) * inv_std[j];
                xh_row[j] = xh;
                out_row[j] = bn.gamma[j] * xh + bn.beta[j];
            }
        });

    // Running stats use the unbiased variance estimate.
    let mom = F::from_f64(BN_MOMENTUM);
    let keep = F::one() - mom;
    let unbias = F::from_f64(batch as f64 / (batch as f64 - 1.0));
    for j in 0..dim {
        bn.running_mean[j] = keep * bn.running_mean[j] + mom * mean[j];
        bn.running_var[j] = keep * bn.running_var[j] + mom * var[j] * unbias;
    }

    (out, BnCache { inv_std, xhat })
}

fn bn_forward_eval<F: Scalar>(bn: &BnParams<F>, x: &Mat<F>) -> Mat<F> {
    let dim = bn.dim;
    let eps = F::from_f64(BN_EPS);
    let scale: Vec<F> = (0..dim)
        .map(|j| bn.gamma[j] / (bn.running_var[j] + eps).sqrt())
        .collect();
    let mut out = Mat::zeros(x.rows(), dim);
    out.data_mut()
        .par_chunks_mut(dim)
        .enumerate()
        .for_each(|(b, out_row)| {
            let x_row = x.row(b);
            for j in 0..dim {
                out_row[j] = scale[j] * (x_row[j] - bn.running_mean[j]) + bn.beta[j];
            }
        });
    out
}

fn bn_backward<F: Scalar>(
    bn: &BnParams<F>,
    cache: &BnCache<F>,
    g: &Mat<F>,
    dgamma: &mut [F],
    dbeta: &mut [F],
) -> Mat<F> {
    let batch = g.rows();
    let dim = bn.dim;
    let bf = F::from_f64(batch as f64);

    // dgamma[j] = sum_b g * xhat; dbeta[j] = sum_b g (row-major accumulation).
    for b in 0..batch {
        let g_row = g.row(b);
        let xh_row = cache.xhat.row(b);
        for j in 0..dim {
            dgamma[j] = dgamma[j] + g_row[j] * xh_row[j];
            dbeta[j] = dbeta[j] + g_row[j];
        }
    }

    // dx = (gamma * inv_std / B) * (B * g - dbeta - xhat * dgamma)
    let c1: Vec<F> = (0..dim).map(|j| bn.gamma[j] * cache.inv_std[j]).collect();
    let c2: Vec<F> = (0..dim).map(|j| dbeta[j] / bf).collect();
    let c3: Vec<F> = (0..dim).map(|j| dgamma[j] / bf).collect();
    let mut dx = Mat::zeros(batch, dim);
    dx.data_mut()
        .par_chunks_mut(dim)
        .enumerate()
        .for_each(|(b, dx_row)| {
            let g_row = g.row(b);
            let xh_row = cache.xhat.row(b);
            for j in 0..dim {
                dx_row[j] = c1[j] * (g_row[j] - c2[j] - xh_row[j] * c3[j]);
            }
        });
    dx
}

fn relu<F: Scalar>(x: &Mat<F>) -> Mat<F> {
    let mut out = x.clone();
    for v in out.data_mut() {
        if *v < F::zero() {
            *v = F::zero();
        }
    }
    out
}

fn relu_backward<F: Scalar>(g: &Mat<F>, out: &Mat<F>) -> Mat<F> {
    let mut dg = g.clone();
    for (d, &o) in dg.data_mut().iter_mut().zip(out.data()) {
        if o <= F::zero() {
            *d = F::zero();
        }
    }
    dg
}

fn add<F: Scalar>(a: &Mat<F>, b: &Mat<F>) -> Mat<F> {
    let mut out = a.clone();
    add_assign(&mut out, b);
    out
}

fn add_assign<F: Scalar>(a: &mut Mat<F>, b: &Mat<F>) {
    for (x, &y) in a.data_mut().iter_mut().zip(b.data()) {
        *x = *x + y;
    }
}

/// Head loss, accuracy, and (optionally) the gradient w.r.t. logits.
fn head_loss_and_grad<F: Scalar>(
    head: OutputHead,
    logits: &Mat<F>,
    labels: &Labels<F>,
    want_grad: bool,
) -> Result<(Option<Mat<F>>, LossReport)> {
    let batch = logits.rows();
    let out_dim = logits.cols();
    if labels.len() != batch {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for a batch of {batch}",
            labels.len()
        )));
    }
    let mut grad = want_grad.then(|| Mat::zeros(batch, out_dim));
    let mut losses = vec![0.0f64; batch];
    let mut hits = vec![0.0f64; batch];

    match (head, labels) {
        (OutputHead::SoftmaxCategorical, Labels::Classes(ys)) => {
            if let Some(&y) = ys.iter().find(|&&y| y as usize >= out_dim) {
                return Err(Error::ShapeMismatch(format!(
                    "class {y} out of range for {out_dim} outputs"
                )));
            }
            let bf = F::from_f64(batch as f64);
            let grad_rows: Vec<Option<&mut [F]>> = match grad.as_mut() {
                Some(g) => g.data_mut().chunks_mut(out_dim).map(Some).collect(),
                None => (0..batch).map(|_| None).collect(),
            };
            losses
                .par_iter_mut()
                .zip(hits.par_iter_mut())
                .zip(grad_rows.into_par_iter())
                .enumerate()
                .for_each(|(b, ((loss, hit), g_row))| {
                    let z = logits.row(b);
                    let y = ys[b] as usize;
                    let mut zmax = z[0];
                    let mut argmax = 0usize;
                    for (j, &v) in z.iter().enumerate() {
                        if v > zmax {
                            zmax = v;
                            argmax = j;
                        }
                    }
                    let mut sum = F::zero();
                    for &v in z {
                        sum = sum + (v - zmax).exp();
                    }
                    let lse = zmax + sum.ln();
                    *loss = (lse - z[y]).into_f64();
                    *hit = f64::from(argmax == y);
                    if let Some(g_row) = g_row {
                        for (j, gj) in g_row.iter_mut().enumerate() {
                            let p = (z[j] - lse).exp();
                            let t = if j == y { F::one() } else { F::zero() };
                            *gj = (p - t) / bf;
                        }
                    }
                });
        }
        (OutputHead::SigmoidMultilabel, Labels::Bits(ts)) => {
            if ts.cols() != out_dim {
                return Err(Error::ShapeMismatch(format!(
                    "{} label columns for {out_dim} outputs",
                    ts.cols()
                )));
            }
            let denom = F::from_f64((batch * out_dim) as f64);
            let grad_rows: Vec<Option<&mut [F]>> = match grad.as_mut() {
                Some(g) => g.data_mut().chunks_mut(out_dim).map(Some).collect(),
                None => (0..batch).map(|_| None).collect(),
            };
            losses
                .par_iter_mut()
                .zip(hits.par_iter_mut())
                .zip(grad_rows.into_par_iter())
                .enumerate()
                .for_each(|(b, ((loss, hit), g_row))| {
                    let z = logits.row(b);
                    let t = ts.row(b);
                    let mut l = 0.0f64;
                    let mut correct = 0usize;
                    for j in 0..out_dim {
                        let zj = z[j].into_f64();
                        let tj = t[j].into_f64();
                        // Stable BCE on logits.
                        l += zj.max(0.0) - zj * tj + (-zj.abs()).exp().ln_1p();
                        if (zj > 0.0) == (tj > 0.5) {
                            correct += 1;
                        }
                    }
                    *loss = l / out_dim as f64;
                    *hit = correct as f64 / out_dim as f64;
                    if let Some(g_row) = g_row {
                        for j in 0..out_dim {
                            let p = F::one() / (F::one() + (-z[j]).exp());
                            g_row[j] = (p - t[j]) / denom;
                        }
                    }
                });
        }
        _ => {
            return Err(Error::ShapeMismatch(
                "label kind does not match the output head".into(),
            ))
        }
    }

    let loss = losses.iter().sum::<f64>() / batch as f64;
    let accuracy = hits.iter().sum::<f64>() / batch as f64;
    Ok((grad, LossReport { cross_entropy: loss, accuracy }))
}
