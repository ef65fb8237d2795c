//! Checkpoint serialization: the `USCR` blob container with a JSON header
//! (model config, scramble config, seed, step) and one blob per tensor,
//! including batch-norm running statistics and Adam moments. Loading a
//! checkpoint and running an eval-mode forward is bit-identical to the
//! bundle that was saved.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blob::{Container, DType, Tensor};
use crate::error::{Error, Result};
use crate::nn::{AdamState, Mat, ModelBundle, ModelConfig, Scalar};
use crate::puzzle::PuzzleSpec;
use crate::scramble::ScrambleConfig;

/// Everything about a training run that is not a tensor.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub puzzle: PuzzleSpec,
    pub model: ModelConfig,
    pub scramble: ScrambleConfig,
    pub seed: u64,
    pub step: u64,
    pub dtype: String,
}

fn tensor_of<F: Scalar>(name: &str, dims: Vec<u32>, values: &[F]) -> Tensor {
    match F::DTYPE {
        DType::F32 => Tensor::from_f32(name, dims, &values.iter().map(|v| v.into_f64() as f32).collect::<Vec<_>>()),
        DType::F64 => Tensor::from_f64(name, dims, &values.iter().map(|v| v.into_f64()).collect::<Vec<_>>()),
        _ => unreachable!("scalar dtypes are floating point"),
    }
}

fn values_of<F: Scalar>(t: &Tensor, want_len: usize) -> Result<Vec<F>> {
    let vals: Vec<F> = match F::DTYPE {
        DType::F32 => t.as_f32()?.into_iter().map(|v| F::from_f64(v as f64)).collect(),
        DType::F64 => t.as_f64()?.into_iter().map(F::from_f64).collect(),
        _ => unreachable!(),
    };
    if vals.len() != want_len {
        return Err(Error::BadCheckpoint(format!(
            "tensor `{}` has {} elements, expected {want_len}",
            t.name,
            vals.len()
        )));
    }
    Ok(vals)
}

pub fn save_checkpoint<F: Scalar>(
    path: &Path,
    bundle: &ModelBundle<F>,
    puzzle: PuzzleSpec,
    scramble: &ScrambleConfig,
) -> Result<()> {
    let meta = CheckpointMeta {
        puzzle,
        model: bundle.config,
        scramble: *scramble,
        seed: bundle.seed,
        step: bundle.step,
        dtype: F::DTYPE.name().to_string(),
    };
    let header = serde_json::json!({
        "kind": "checkpoint",
        "meta": meta,
    });
    let mut container = Container::new(header);

    for (i, lin) in bundle.linears.iter().enumerate() {
        container.push(tensor_of::<F>(
            &format!("linear{i}.weight"),
            vec![lin.out_dim as u32, lin.in_dim as u32],
            &lin.weight,
        ));
        container.push(tensor_of::<F>(
            &format!("linear{i}.bias"),
            vec![lin.out_dim as u32],
            &lin.bias,
        ));
    }
    for (j, bn) in bundle.bns.iter().enumerate() {
        let d = bn.dim as u32;
        container.push(tensor_of::<F>(&format!("bn{j}.gamma"), vec![d], &bn.gamma));
        container.push(tensor_of::<F>(&format!("bn{j}.beta"), vec![d], &bn.beta));
        container.push(tensor_of::<F>(&format!("bn{j}.running_mean"), vec![d], &bn.running_mean));
        container.push(tensor_of::<F>(&format!("bn{j}.running_var"), vec![d], &bn.running_var));
    }
    for (k, (m, v)) in bundle.adam.m.iter().zip(&bundle.adam.v).enumerate() {
        container.push(tensor_of::<F>(&format!("adam.m.{k}"), vec![m.len() as u32], m));
        container.push(tensor_of::<F>(&format!("adam.v.{k}"), vec![v.len() as u32], v));
    }
    container.save(path)
}

pub fn load_checkpoint<F: Scalar>(path: &Path) -> Result<(ModelBundle<F>, CheckpointMeta)> {
    let container = Container::load(path)?;
    if container.header.get("kind").and_then(|k| k.as_str()) != Some("checkpoint") {
        return Err(Error::BadCheckpoint("not a checkpoint file".into()));
    }
    let meta: CheckpointMeta = serde_json::from_value(
        container
            .header
            .get("meta")
            .cloned()
            .ok_or_else(|| Error::BadCheckpoint("missing meta header".into()))?,
    )
    .map_err(|e| Error::BadCheckpoint(format!("meta header: {e}")))?;
    if meta.dtype != F::DTYPE.name() {
        return Err(Error::BadCheckpoint(format!(
            "checkpoint dtype {} does not match requested {}",
            meta.dtype,
            F::DTYPE.name()
        )));
    }

    let mut bundle = ModelBundle::<F>::init(&meta.model, 0)?;
    bundle.seed = meta.seed;
    bundle.step = meta.step;

    for (i, lin) in bundle.linears.iter_mut().enumerate() {
        lin.weight = values_of(container.find(&format!("linear{i}.weight"))?, lin.weight.len())?;
        lin.bias = values_of(container.find(&format!("linear{i}.bias"))?, lin.bias.len())?;
    }
    for (j, bn) in bundle.bns.iter_mut().enumerate() {
        bn.gamma = values_of(container.find(&format!("bn{j}.gamma"))?, bn.dim)?;
        bn.beta = values_of(container.find(&format!("bn{j}.beta"))?, bn.dim)?;
        bn.running_mean = values_of(container.find(&format!("bn{j}.running_mean"))?, bn.dim)?;
        bn.running_var = values_of(container.find(&format!("bn{j}.running_var"))?, bn.dim)?;
        if bn.running_var.iter().any(|v| *v <= F::zero()) {
            return Err(Error::BadCheckpoint(format!("bn{j} running variance must be positive")));
        }
    }
    let mut adam = AdamState { m: Vec::new(), v: Vec::new() };
    for (k, m) in bundle.adam.m.iter().enumerate() {
        adam.m.push(values_of(container.find(&format!("adam.m.{k}"))?, m.len())?);
    }
    for (k, v) in bundle.adam.v.iter().enumerate() {
        adam.v.push(values_of(container.find(&format!("adam.v.{k}"))?, v.len())?);
    }
    bundle.adam = adam;
    Ok((bundle, meta))
}

/// Convenience for tests: encode a set of states as one eval batch.
pub fn encode_states<F: Scalar>(
    puzzle: &crate::puzzle::Puzzle,
    states: &[crate::puzzle::State],
) -> Mat<F> {
    let mut m = Mat::zeros(states.len(), puzzle.encoding_dim());
    for (i, s) in states.iter().enumerate() {
        puzzle.encode_into(s, m.row_mut(i));
    }
    m
}
