//! Adam optimizer state and update.

use super::mat::Scalar;
use super::network::{tensor_names, BnParams, Gradients, LinearParams, ModelBundle};
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moments per trainable tensor, in canonical order.
#[derive(Clone, Debug)]
pub struct AdamState<F> {
    pub m: Vec<Vec<F>>,
    pub v: Vec<Vec<F>>,
}

impl<F: Scalar> AdamState<F> {
    pub(crate) fn zeros_like(linears: &[LinearParams<F>], bns: &[BnParams<F>]) -> Self {
        let mut sizes = Vec::new();
        for lin in linears {
            sizes.push(lin.weight.len());
            sizes.push(lin.bias.len());
        }
        for bn in bns {
            sizes.push(bn.dim);
            sizes.push(bn.dim);
        }
        AdamState {
            m: sizes.iter().map(|&s| vec![F::zero(); s]).collect(),
            v: sizes.iter().map(|&s| vec![F::zero(); s]).collect(),
        }
    }
}

impl<F: Scalar> ModelBundle<F> {
    /// One Adam update with bias correction; increments the step counter.
    /// Aborts with `NonFiniteGradient` before touching any parameter if a
    /// gradient is NaN or infinite.
    pub fn adam_step(&mut self, grads: &Gradients<F>, lr: f64) -> Result<()> {
        let names = tensor_names(&self.config);
        debug_assert_eq!(grads.tensors.len(), names.len());
        for (g, name) in grads.tensors.iter().zip(&names) {
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    tensor: name.clone(),
                    step: self.step,
                });
            }
        }

        let t = self.step + 1;
        let b1 = F::from_f64(ADAM_BETA1);
        let b2 = F::from_f64(ADAM_BETA2);
        let eps = F::from_f64(ADAM_EPS);
        let corr1 = F::from_f64(1.0 - ADAM_BETA1.powi(t as i32));
        let corr2 = F::from_f64(1.0 - ADAM_BETA2.powi(t as i32));
        let lr = F::from_f64(lr);
        let one = F::one();

        let mut idx = 0usize;
        {
            let update = |param: &mut [F], g: &[F], m: &mut [F], v: &mut [F]| {
                for i in 0..param.len() {
                    m[i] = b1 * m[i] + (one - b1) * g[i];
                    v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                    let mhat = m[i] / corr1;
                    let vhat = v[i] / corr2;
                    param[i] = param[i] - lr * mhat / (vhat.sqrt() + eps);
                }
            };
            for lin in &mut self.linears {
                update(&mut lin.weight, &grads.tensors[idx], &mut self.adam.m[idx], &mut self.adam.v[idx]);
                idx += 1;
                update(&mut lin.bias, &grads.tensors[idx], &mut self.adam.m[idx], &mut self.adam.v[idx]);
                idx += 1;
            }
            for bn in &mut self.bns {
                update(&mut bn.gamma, &grads.tensors[idx], &mut self.adam.m[idx], &mut self.adam.v[idx]);
                idx += 1;
                update(&mut bn.beta, &grads.tensors[idx], &mut self.adam.m[idx], &mut self.adam.v[idx]);
                idx += 1;
            }
        }
        debug_assert_eq!(idx, grads.tensors.len());
        self.step = t;
        Ok(())
    }
}
