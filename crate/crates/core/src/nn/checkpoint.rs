//! Versioned JSON model checkpoints. Weights are `f64` serialized with
//! shortest-round-trip formatting, so a save/load cycle is bit-exact.

use super::{BatchNorm2d, Conv2d, Flatten, Layer, LeakyRelu, Linear, MaxPool2d, Model};
use crate::numerics::Tensor;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported checkpoint version {0} (expected {CHECKPOINT_VERSION})")]
    Version(u32),
    #[error("inconsistent checkpoint: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, CheckpointError>;

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    epoch: usize,
    layers: Vec<LayerState>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LayerState {
    Conv2d {
        in_c: usize,
        out_c: usize,
        k: usize,
        pad: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
    },
    BatchNorm2d {
        c: usize,
        gamma: Vec<f64>,
        beta: Vec<f64>,
        running_mean: Vec<f64>,
        running_var: Vec<f64>,
        momentum: f64,
        eps: f64,
    },
    LeakyRelu {
        slope: f64,
    },
    MaxPool2d {
        k: usize,
        stride: usize,
    },
    Linear {
        in_f: usize,
        out_f: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
    },
    Flatten,
}

fn to_state(layer: &Layer) -> LayerState {
    match layer {
        Layer::Conv2d(l) => LayerState::Conv2d {
            in_c: l.in_c,
            out_c: l.out_c,
            k: l.k,
            pad: l.pad,
            weight: l.weight.data().to_vec(),
            bias: l.bias.clone(),
        },
        Layer::BatchNorm2d(l) => LayerState::BatchNorm2d {
            c: l.c,
            gamma: l.gamma.clone(),
            beta: l.beta.clone(),
            running_mean: l.running_mean.clone(),
            running_var: l.running_var.clone(),
            momentum: l.momentum,
            eps: l.eps,
        },
        Layer::LeakyRelu(l) => LayerState::LeakyRelu { slope: l.slope },
        Layer::MaxPool2d(l) => LayerState::MaxPool2d {
            k: l.k,
            stride: l.stride,
        },
        Layer::Linear(l) => LayerState::Linear {
            in_f: l.in_f,
            out_f: l.out_f,
            weight: l.weight.data().to_vec(),
            bias: l.bias.clone(),
        },
        Layer::Flatten(_) => LayerState::Flatten,
    }
}

fn from_state(state: LayerState) -> Result<Layer> {
    Ok(match state {
        LayerState::Conv2d {
            in_c,
            out_c,
            k,
            pad,
            weight,
            bias,
        } => {
            if weight.len() != out_c * in_c * k * k || bias.len() != out_c {
                return Err(CheckpointError::Inconsistent(format!(
                    "conv2d({in_c}, {out_c}, {k}) with {} weights, {} biases",
                    weight.len(),
                    bias.len()
                )));
            }
            let weight = Tensor::new(vec![out_c, in_c, k, k], weight)
                .map_err(|e| CheckpointError::Inconsistent(e.to_string()))?;
            Layer::Conv2d(Conv2d::new(in_c, out_c, k, pad, weight, bias))
        }
        LayerState::BatchNorm2d {
            c,
            gamma,
            beta,
            running_mean,
            running_var,
            momentum,
            eps,
        } => {
            if [&gamma, &beta, &running_mean, &running_var]
                .iter()
                .any(|v| v.len() != c)
            {
                return Err(CheckpointError::Inconsistent(format!(
                    "batchnorm2d({c}) with mismatched buffers"
                )));
            }
            if running_var.iter().any(|v| !v.is_finite()) {
                return Err(CheckpointError::Inconsistent(
                    "non-finite running variance".into(),
                ));
            }
            let mut bn = BatchNorm2d::new(c);
            bn.gamma = gamma;
            bn.beta = beta;
            bn.running_mean = running_mean;
            bn.running_var = running_var;
            bn.momentum = momentum;
            bn.eps = eps;
            Layer::BatchNorm2d(bn)
        }
        LayerState::LeakyRelu { slope } => Layer::LeakyRelu(LeakyRelu::new(slope)),
        LayerState::MaxPool2d { k, stride } => Layer::MaxPool2d(MaxPool2d::new(k, stride)),
        LayerState::Linear {
            in_f,
            out_f,
            weight,
            bias,
        } => {
            if weight.len() != out_f * in_f || bias.len() != out_f {
                return Err(CheckpointError::Inconsistent(format!(
                    "linear({in_f}, {out_f}) with {} weights, {} biases",
                    weight.len(),
                    bias.len()
                )));
            }
            let weight = Tensor::new(vec![out_f, in_f], weight)
                .map_err(|e| CheckpointError::Inconsistent(e.to_string()))?;
            Layer::Linear(Linear::new(in_f, out_f, weight, bias))
        }
        LayerState::Flatten => Layer::Flatten(Flatten::new()),
    })
}

/// Serializes the model and epoch counter. The write is atomic: a temporary
/// file in the target directory is renamed into place.
pub fn save(model: &Model, epoch: usize, path: &Path) -> Result<()> {
    let ckpt = Checkpoint {
        version: CHECKPOINT_VERSION,
        epoch,
        layers: model.layers.iter().map(to_state).collect(),
    };
    let json = serde_json::to_vec(&ckpt)?;
    let io_err = |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    };
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, &json).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(Model, usize)> {
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let ckpt: Checkpoint = serde_json::from_slice(&bytes)?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(ckpt.version));
    }
    let layers = ckpt
        .layers
        .into_iter()
        .map(from_state)
        .collect::<Result<Vec<_>>>()?;
    Ok((Model::new(layers), ckpt.epoch))
}
