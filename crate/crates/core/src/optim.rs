//! SGD and Adam, plus a fixed-iteration minimization driver shared by the
//! Monte-Carlo experiments and CNN training.

use crate::numerics::Tensor;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("non-finite gradient at step {step}")]
    Divergence { step: u64 },
    #[error("parameter/gradient shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),
    #[error("minimize requires at least one iteration")]
    ZeroIterations,
}

pub type Result<T> = std::result::Result<T, OptimError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OptimizerKind::Sgd => write!(f, "sgd"),
            OptimizerKind::Adam => write!(f, "adam"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// SGD velocity coefficient; plain SGD (the default) uses none.
    pub momentum: f64,
}

impl OptimizerConfig {
    pub fn sgd(lr: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            lr,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            momentum: 0.0,
        }
    }

    pub fn adam(lr: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            ..Self::sgd(lr)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(OptimError::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        for (name, beta) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(OptimError::InvalidConfig(format!(
                    "{name} must be in [0, 1), got {beta}"
                )));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(OptimError::InvalidConfig(format!(
                "eps must be positive, got {}",
                self.adam_eps
            )));
        }
        if self.momentum < 0.0 || self.momentum >= 1.0 {
            return Err(OptimError::InvalidConfig(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }
}

/// Per-parameter-set optimizer state: moment buffers for Adam, velocity for
/// SGD with momentum, and the step counter driving bias correction.
#[derive(Debug, Clone)]
pub struct Optimizer {
    cfg: OptimizerConfig,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
    velocity: Vec<f64>,
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
            velocity: Vec::new(),
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update of `params` in place. Rejects non-finite gradients with
    /// the step index at which they appeared.
    pub fn step(&mut self, params: &mut Tensor, grads: &Tensor) -> Result<()> {
        if params.shape() != grads.shape() {
            return Err(OptimError::ShapeMismatch {
                left: params.shape().to_vec(),
                right: grads.shape().to_vec(),
            });
        }
        self.step_slice(params.data_mut(), grads.data())
    }

    /// Slice-level update for callers that manage their own buffers.
    pub fn step_slice(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(OptimError::ShapeMismatch {
                left: vec![params.len()],
                right: vec![grads.len()],
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(OptimError::Divergence { step: self.step });
        }
        self.step += 1;
        match self.cfg.kind {
            OptimizerKind::Sgd => {
                if self.cfg.momentum > 0.0 {
                    if self.velocity.len() != params.len() {
                        self.velocity = vec![0.0; params.len()];
                    }
                    for ((p, &g), vel) in
                        params.iter_mut().zip(grads).zip(self.velocity.iter_mut())
                    {
                        *vel = self.cfg.momentum * *vel + g;
                        *p -= self.cfg.lr * *vel;
                    }
                } else {
                    for (p, &g) in params.iter_mut().zip(grads) {
                        *p -= self.cfg.lr * g;
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.m.len() != params.len() {
                    self.m = vec![0.0; params.len()];
                    self.v = vec![0.0; params.len()];
                }
                let b1 = self.cfg.adam_beta1;
                let b2 = self.cfg.adam_beta2;
                let t = self.step as i32;
                let bc1 = 1.0 - b1.powi(t);
                let bc2 = 1.0 - b2.powi(t);
                for (i, (p, &g)) in params.iter_mut().zip(grads).enumerate() {
                    self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
                    self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
                    let m_hat = self.m[i] / bc1;
                    let v_hat = self.v[i] / bc2;
                    *p -= self.cfg.lr * m_hat / (v_hat.sqrt() + self.cfg.adam_eps);
                }
            }
        }
        Ok(())
    }
}

/// Runs exactly `iters` optimizer steps on `objective`, which returns the
/// loss and its gradient at the current parameters. `trace_hook` observes
/// `(iteration, loss, params)` evaluated at the start of each iteration, so
/// the first observation is the initial state.
pub fn minimize<F, H>(
    objective: F,
    init: Tensor,
    cfg: OptimizerConfig,
    iters: usize,
    mut trace_hook: H,
) -> Result<(Tensor, Vec<f64>)>
where
    F: Fn(&Tensor) -> (f64, Tensor),
    H: FnMut(usize, f64, &Tensor),
{
    if iters == 0 {
        return Err(OptimError::ZeroIterations);
    }
    let mut params = init;
    let mut opt = Optimizer::new(cfg)?;
    let mut losses = Vec::with_capacity(iters);
    for it in 0..iters {
        let (loss, grad) = objective(&params);
        trace_hook(it, loss, &params);
        losses.push(loss);
        opt.step(&mut params, &grad)?;
    }
    Ok((params, losses))
}
