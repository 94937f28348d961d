//! From-scratch CNN engine: the layer stack, backprop driver, the two
//! convolutional-similarity minimization schemes (pre-training iterative
//! initialization and in-training regularization), and evaluation.

mod layers;
pub mod checkpoint;

pub use layers::{
    cross_entropy, BatchNorm2d, Conv2d, Flatten, LeakyRelu, Linear, MaxPool2d, NnError, Result,
};

use crate::convsim::{conv_sim_value_and_grad, KernelBank, LossValue, Spatial};
use crate::data::{batches, Dataset};
use crate::numerics::{RngStream, Tensor};
use crate::optim::{Optimizer, OptimizerConfig};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone)]
pub enum Layer {
    Conv2d(Conv2d),
    BatchNorm2d(BatchNorm2d),
    LeakyRelu(LeakyRelu),
    MaxPool2d(MaxPool2d),
    Linear(Linear),
    Flatten(Flatten),
}

impl Layer {
    fn forward(&mut self, x: &Tensor, training: bool) -> Result<Tensor> {
        match self {
            Layer::Conv2d(l) => l.forward(x, training),
            Layer::BatchNorm2d(l) => l.forward(x, training),
            Layer::LeakyRelu(l) => l.forward(x, training),
            Layer::MaxPool2d(l) => l.forward(x, training),
            Layer::Linear(l) => l.forward(x, training),
            Layer::Flatten(l) => l.forward(x, training),
        }
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Conv2d(l) => l.backward(grad),
            Layer::BatchNorm2d(l) => l.backward(grad),
            Layer::LeakyRelu(l) => l.backward(grad),
            Layer::MaxPool2d(l) => l.backward(grad),
            Layer::Linear(l) => l.backward(grad),
            Layer::Flatten(l) => l.backward(grad),
        }
    }
}

/// An ordered layer stack plus the indices of its convolutional layers (the
/// targets of both similarity-minimization schemes).
#[derive(Debug, Clone)]
pub struct Model {
    pub layers: Vec<Layer>,
    pub conv_layer_indices: Vec<usize>,
}

fn attach_layer(err: NnError, layer: usize) -> NnError {
    match err {
        NnError::ShapeMismatch { expected, got, .. } => NnError::ShapeMismatch {
            layer,
            expected,
            got,
        },
        other => other,
    }
}

fn he_uniform<R: Rng>(rng: &mut R, fan_in: usize, shape: Vec<usize>) -> Tensor {
    let bound = (6.0 / fan_in as f64).sqrt();
    crate::numerics::sample_uniform_from(rng, -bound, bound, shape).expect("valid init shape")
}

impl Model {
    pub fn new(layers: Vec<Layer>) -> Self {
        let conv_layer_indices = layers
            .iter()
            .enumerate()
            .filter_map(|(i, l)| matches!(l, Layer::Conv2d(_)).then_some(i))
            .collect();
        Self {
            layers,
            conv_layer_indices,
        }
    }

    fn conv_block<R: Rng>(rng: &mut R, in_c: usize, out_c: usize) -> Vec<Layer> {
        let k = 3;
        let weight = he_uniform(rng, in_c * k * k, vec![out_c, in_c, k, k]);
        vec![
            Layer::Conv2d(Conv2d::new(in_c, out_c, k, 2, weight, vec![0.0; out_c])),
            Layer::BatchNorm2d(BatchNorm2d::new(out_c)),
            Layer::LeakyRelu(LeakyRelu::new(0.2)),
            Layer::MaxPool2d(MaxPool2d::new(2, 2)),
        ]
    }

    fn shallow_cnn(width: usize, flat: usize, seed: u64) -> Self {
        let mut rng = RngStream::new(seed, 0).rng();
        let mut layers = Vec::new();
        layers.extend(Self::conv_block(&mut rng, 3, width));
        for _ in 0..3 {
            layers.extend(Self::conv_block(&mut rng, width, width));
        }
        layers.push(Layer::Flatten(Flatten::new()));
        let weight = he_uniform(&mut rng, flat, vec![10, flat]);
        layers.push(Layer::Linear(Linear::new(flat, 10, weight, vec![0.0; 10])));
        Self::new(layers)
    }

    /// Four 64-channel conv blocks (kernel 3, padding 2) and a 576->10 head.
    pub fn cnn1(seed: u64) -> Self {
        Self::shallow_cnn(64, 576, seed)
    }

    /// Twice the feature maps per layer: 128-channel blocks, 1152->10 head.
    pub fn cnn2(seed: u64) -> Self {
        Self::shallow_cnn(128, 1152, seed)
    }

    /// Small stack for tests and smoke runs: one 8-channel conv block on
    /// 32x32 inputs.
    pub fn tiny(seed: u64) -> Self {
        let mut rng = RngStream::new(seed, 0).rng();
        let mut layers = Self::conv_block(&mut rng, 3, 8);
        layers.push(Layer::Flatten(Flatten::new()));
        let flat = 8 * 17 * 17;
        let weight = he_uniform(&mut rng, flat, vec![10, flat]);
        layers.push(Layer::Linear(Linear::new(flat, 10, weight, vec![0.0; 10])));
        Self::new(layers)
    }

    pub fn forward(&mut self, x: &Tensor, training: bool) -> Result<Tensor> {
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            cur = layer.forward(&cur, training).map_err(|e| attach_layer(e, i))?;
        }
        Ok(cur)
    }

    /// Backpropagates `grad` (gradient at the output) through the stack,
    /// accumulating parameter gradients. Requires a preceding training-mode
    /// forward.
    pub fn backward(&mut self, grad: &Tensor) -> Result<()> {
        let mut cur = grad.clone();
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            cur = layer.backward(&cur).map_err(|e| attach_layer(e, i))?;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for layer in &mut self.layers {
            match layer {
                Layer::Conv2d(l) => {
                    l.weight_grad.data_mut().fill(0.0);
                    l.bias_grad.fill(0.0);
                }
                Layer::BatchNorm2d(l) => {
                    l.gamma_grad.fill(0.0);
                    l.beta_grad.fill(0.0);
                }
                Layer::Linear(l) => {
                    l.weight_grad.data_mut().fill(0.0);
                    l.bias_grad.fill(0.0);
                }
                _ => {}
            }
        }
    }

    /// Visits every parameter tensor as `(slot, params, grads)` in a fixed
    /// order.
    pub fn visit_param_slots<F>(&mut self, mut f: F) -> Result<()>
    where
        F: FnMut(usize, &mut [f64], &[f64]) -> Result<()>,
    {
        let mut slot = 0;
        for layer in &mut self.layers {
            match layer {
                Layer::Conv2d(l) => {
                    f(slot, l.weight.data_mut(), l.weight_grad.data())?;
                    slot += 1;
                    f(slot, &mut l.bias, &l.bias_grad)?;
                    slot += 1;
                }
                Layer::BatchNorm2d(l) => {
                    f(slot, &mut l.gamma, &l.gamma_grad)?;
                    slot += 1;
                    f(slot, &mut l.beta, &l.beta_grad)?;
                    slot += 1;
                }
                Layer::Linear(l) => {
                    f(slot, l.weight.data_mut(), l.weight_grad.data())?;
                    slot += 1;
                    f(slot, &mut l.bias, &l.bias_grad)?;
                    slot += 1;
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn num_param_slots(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Conv2d(_) | Layer::BatchNorm2d(_) | Layer::Linear(_) => 2,
                _ => 0,
            })
            .sum()
    }

    /// Total trainable parameter count.
    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Conv2d(c) => c.weight.len() + c.bias.len(),
                Layer::BatchNorm2d(b) => b.gamma.len() + b.beta.len(),
                Layer::Linear(lin) => lin.weight.len() + lin.bias.len(),
                _ => 0,
            })
            .sum()
    }

    fn conv_bank(conv: &Conv2d) -> KernelBank {
        KernelBank::new(
            conv.out_c,
            conv.in_c,
            Spatial::TwoD(conv.k, conv.k),
            conv.weight.clone(),
        )
        .expect("layer weights form a valid bank")
    }

    /// Sum of the convolutional-similarity loss over all conv layers.
    pub fn conv_sim(&self) -> Result<LossValue> {
        let mut total = 0.0;
        for &i in &self.conv_layer_indices {
            if let Layer::Conv2d(conv) = &self.layers[i] {
                total += crate::convsim::conv_sim_bank(&Self::conv_bank(conv))?.value;
            }
        }
        Ok(LossValue {
            value: total,
            gradient: None,
        })
    }

    /// Adds `beta * d(conv_sim)/d(weights)` into each conv layer's weight
    /// gradient and returns the summed loss value.
    pub fn add_conv_sim_grads(&mut self, beta: f64) -> Result<f64> {
        let mut total = 0.0;
        for &i in &self.conv_layer_indices {
            if let Layer::Conv2d(conv) = &mut self.layers[i] {
                let lv = conv_sim_value_and_grad(&Self::conv_bank(conv))?;
                total += lv.value;
                let grad = lv.gradient.expect("gradient requested");
                conv.weight_grad.add_scaled(&grad, beta)?;
            }
        }
        Ok(total)
    }
}

/// Convenience alias matching the operation vocabulary.
pub fn model_conv_sim(model: &Model) -> Result<LossValue> {
    model.conv_sim()
}

/// Training configuration for the two minimization schemes.
///
/// `init_iters > 0` selects iterative initialization, `beta > 0` selects the
/// regularization term, and both zero is the plain baseline. Selecting both
/// at once is rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub init_iters: usize,
    pub beta: f64,
    pub task_optimizer: OptimizerConfig,
    /// Optimizer for the pre-training minimization (iterative
    /// initialization only; the regularization term rides the task step).
    pub convsim_optimizer: OptimizerConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            init_iters: 0,
            beta: 0.0,
            task_optimizer: OptimizerConfig::sgd(0.01),
            convsim_optimizer: OptimizerConfig::adam(0.001),
            epochs: 10,
            batch_size: 128,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.init_iters > 0 && self.beta > 0.0 {
            return Err(NnError::InvalidConfig(
                "init_iters > 0 and beta > 0 select conflicting schemes".into(),
            ));
        }
        if self.beta < 0.0 {
            return Err(NnError::InvalidConfig("beta must be >= 0".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(NnError::InvalidConfig(
                "epochs and batch_size must be >= 1".into(),
            ));
        }
        self.task_optimizer.validate()?;
        self.convsim_optimizer.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitReport {
    pub iterations: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Minimizes the summed conv-layer similarity loss for `iters` steps before
/// any task training, touching only conv kernel weights.
pub fn iterative_init(model: &mut Model, cfg: &OptimizerConfig, iters: usize) -> Result<InitReport> {
    let initial_loss = model.conv_sim()?.value;
    if iters == 0 {
        return Ok(InitReport {
            iterations: 0,
            initial_loss,
            final_loss: initial_loss,
        });
    }
    let mut opts: Vec<Optimizer> = model
        .conv_layer_indices
        .iter()
        .map(|_| Optimizer::new(*cfg))
        .collect::<std::result::Result<_, _>>()?;
    for _ in 0..iters {
        for (oi, &li) in model.conv_layer_indices.clone().iter().enumerate() {
            if let Layer::Conv2d(conv) = &mut model.layers[li] {
                let lv = conv_sim_value_and_grad(&Model::conv_bank(conv))?;
                let grad = lv.gradient.expect("gradient requested");
                opts[oi].step_slice(conv.weight.data_mut(), grad.data())?;
            }
        }
    }
    let final_loss = model.conv_sim()?.value;
    Ok(InitReport {
        iterations: iters,
        initial_loss,
        final_loss,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub task_loss: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
    pub conv_sim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    /// Similarity loss at the freshly initialized weights, before any
    /// minimization.
    pub pre_init_conv_sim: f64,
    pub init: Option<InitReport>,
    pub records: Vec<EpochRecord>,
}

pub fn train(
    model: &mut Model,
    train_ds: &Dataset,
    test_ds: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<TrainingLog> {
    train_from(model, train_ds, test_ds, cfg, 0)
}

/// Runs epochs `start_epoch..cfg.epochs`. Epoch `e` always shuffles with
/// stream `e` of `cfg.seed`, so resuming from a checkpoint replays the same
/// batches the uninterrupted run would have seen.
pub fn train_from(
    model: &mut Model,
    train_ds: &Dataset,
    test_ds: Option<&Dataset>,
    cfg: &TrainConfig,
    start_epoch: usize,
) -> Result<TrainingLog> {
    cfg.validate()?;
    if train_ds.len() == 0 {
        return Err(NnError::InvalidConfig("training set is empty".into()));
    }

    let pre_init_conv_sim = model.conv_sim()?.value;
    let init = if cfg.init_iters > 0 && start_epoch == 0 {
        Some(iterative_init(model, &cfg.convsim_optimizer, cfg.init_iters)?)
    } else {
        None
    };

    let mut opts: Vec<Optimizer> = (0..model.num_param_slots())
        .map(|_| Optimizer::new(cfg.task_optimizer))
        .collect::<std::result::Result<_, _>>()?;

    let mut records = Vec::new();
    for epoch in start_epoch..cfg.epochs {
        let mut epoch_loss = 0.0;
        let mut steps = 0usize;
        let mut correct = 0usize;
        let mut seen = 0usize;
        for (step, (images, labels)) in
            batches(train_ds, cfg.batch_size, cfg.seed, epoch as u64, true)?.enumerate()
        {
            model.zero_grads();
            let logits = model.forward(&images, true)?;
            let (loss, grad) = cross_entropy(&logits, &labels)?;
            correct += count_correct(&logits, &labels);
            seen += labels.len();
            epoch_loss += loss;
            steps += 1;
            model.backward(&grad)?;
            if cfg.beta > 0.0 {
                model.add_conv_sim_grads(cfg.beta)?;
            }
            let step_result = model.visit_param_slots(|slot, params, grads| {
                opts[slot]
                    .step_slice(params, grads)
                    .map_err(NnError::Optim)
            });
            step_result.map_err(|e| match e {
                NnError::Optim(source) => NnError::TrainDivergence {
                    epoch,
                    step,
                    source,
                },
                other => other,
            })?;
        }
        let test_acc = match test_ds {
            Some(ds) => Some(evaluate(model, ds, cfg.batch_size)?),
            None => None,
        };
        records.push(EpochRecord {
            epoch,
            task_loss: epoch_loss / steps.max(1) as f64,
            train_acc: 100.0 * correct as f64 / seen.max(1) as f64,
            test_acc,
            conv_sim: model.conv_sim()?.value,
        });
    }

    Ok(TrainingLog {
        pre_init_conv_sim,
        init,
        records,
    })
}

fn count_correct(logits: &Tensor, labels: &[u8]) -> usize {
    let classes = logits.shape()[1];
    labels
        .iter()
        .enumerate()
        .filter(|&(s, &label)| {
            let row = &logits.data()[s * classes..(s + 1) * classes];
            let pred = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite logits"))
                .map(|(i, _)| i)
                .unwrap_or(0);
            pred == label as usize
        })
        .count()
}

/// Argmax-logit accuracy (percent) over a dataset, in evaluation mode.
pub fn evaluate(model: &mut Model, ds: &Dataset, batch_size: usize) -> Result<f64> {
    let mut correct = 0usize;
    let mut seen = 0usize;
    for (images, labels) in batches(ds, batch_size, 0, 0, false)? {
        let logits = model.forward(&images, false)?;
        correct += count_correct(&logits, &labels);
        seen += labels.len();
    }
    Ok(100.0 * correct as f64 / seen.max(1) as f64)
}

/// Writes the per-epoch log as CSV.
pub fn write_log_csv<W: std::io::Write>(log: &TrainingLog, mut w: W) -> std::io::Result<()> {
    writeln!(w, "epoch,task_loss,train_acc,test_acc,conv_sim")?;
    for r in &log.records {
        let test = r.test_acc.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{}",
            r.epoch, r.task_loss, r.train_acc, test, r.conv_sim
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic_dataset;

    #[test]
    fn cnn_parameter_counts_and_flatten_widths() {
        let cnn1 = Model::cnn1(0);
        assert_eq!(cnn1.parameter_count(), 118_858);
        let cnn2 = Model::cnn2(0);
        assert_eq!(cnn2.parameter_count(), 458_890);
        // 3.86x more trainable parameters overall.
        let ratio = cnn2.parameter_count() as f64 / cnn1.parameter_count() as f64;
        assert!((ratio - 3.86).abs() < 0.01);

        for (model, flat) in [(cnn1, 576), (cnn2, 1152)] {
            let lin = model
                .layers
                .iter()
                .find_map(|l| match l {
                    Layer::Linear(lin) => Some(lin),
                    _ => None,
                })
                .unwrap();
            assert_eq!(lin.in_f, flat);
        }
    }

    #[test]
    fn cnn1_forward_shape() {
        let mut model = Model::cnn1(1);
        let x = crate::numerics::sample_uniform(
            RngStream::new(50, 0),
            0.0,
            1.0,
            vec![2, 3, 32, 32],
        )
        .unwrap();
        let logits = model.forward(&x, false).unwrap();
        assert_eq!(logits.shape(), &[2, 10]);
    }

    #[test]
    fn spatial_chain_of_table_stack() {
        // 32 -conv-> 34 -pool-> 17 -conv-> 19 -pool-> 9 -conv-> 11 -pool-> 5
        // -conv-> 7 -pool-> 3.
        let conv = Conv2d::new(1, 1, 3, 2, Tensor::zeros(vec![1, 1, 3, 3]).unwrap(), vec![0.0]);
        let pool = MaxPool2d::new(2, 2);
        let mut hw = 32;
        let expect = [(34, 17), (19, 9), (11, 5), (7, 3)];
        for (after_conv, after_pool) in expect {
            hw = conv.out_hw(hw, hw).0;
            assert_eq!(hw, after_conv);
            hw = pool.out_hw(hw, hw).0;
            assert_eq!(hw, after_pool);
        }
        assert_eq!(64 * hw * hw, 576);
    }

    #[test]
    fn iterative_init_reduces_loss_and_preserves_other_params() {
        let mut model = Model::tiny(3);
        let before_bias: Vec<f64> = model
            .layers
            .iter()
            .find_map(|l| match l {
                Layer::Linear(lin) => Some(lin.weight.data().to_vec()),
                _ => None,
            })
            .unwrap();
        let report = iterative_init(&mut model, &OptimizerConfig::adam(0.001), 100).unwrap();
        assert!(report.final_loss < report.initial_loss);

        let after_bias: Vec<f64> = model
            .layers
            .iter()
            .find_map(|l| match l {
                Layer::Linear(lin) => Some(lin.weight.data().to_vec()),
                _ => None,
            })
            .unwrap();
        assert_eq!(before_bias, after_bias);
    }

    #[test]
    fn iterative_init_zero_iters_is_noop() {
        let mut model = Model::tiny(4);
        let before = model.conv_sim().unwrap().value;
        let report = iterative_init(&mut model, &OptimizerConfig::adam(0.001), 0).unwrap();
        assert_eq!(report.final_loss, before);
        assert_eq!(model.conv_sim().unwrap().value, before);
    }

    #[test]
    fn conflicting_schemes_rejected() {
        let cfg = TrainConfig {
            init_iters: 10,
            beta: 0.1,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn regularized_gradient_is_task_plus_beta_times_convsim() {
        let beta = 0.001;
        let ds = synthetic_dataset(9, 16, 10).unwrap();
        let (images, labels) = batches(&ds, 16, 0, 0, false)
            .unwrap()
            .next()
            .unwrap();

        // Task gradient alone.
        let mut m1 = Model::tiny(7);
        m1.zero_grads();
        let logits = m1.forward(&images, true).unwrap();
        let (_, grad) = cross_entropy(&logits, &labels).unwrap();
        m1.backward(&grad).unwrap();

        // Same model, with the regularization term added.
        let mut m2 = Model::tiny(7);
        m2.zero_grads();
        let logits2 = m2.forward(&images, true).unwrap();
        let (_, grad2) = cross_entropy(&logits2, &labels).unwrap();
        m2.backward(&grad2).unwrap();
        m2.add_conv_sim_grads(beta).unwrap();

        let conv1 = match &m1.layers[0] {
            Layer::Conv2d(c) => c,
            _ => panic!(),
        };
        let conv2 = match &m2.layers[0] {
            Layer::Conv2d(c) => c,
            _ => panic!(),
        };
        let bank = Model::conv_bank(conv1);
        let cs_grad = crate::convsim::conv_sim_grad(&bank).unwrap();
        for i in 0..conv1.weight_grad.len() {
            let expect = conv1.weight_grad.data()[i] + beta * cs_grad.data()[i];
            let got = conv2.weight_grad.data()[i];
            assert!(
                (expect - got).abs() <= 1e-12 * f64::max(1.0, expect.abs()),
                "{expect} vs {got}"
            );
        }
    }

    #[test]
    fn training_is_deterministic() {
        let ds = synthetic_dataset(11, 64, 10).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 32,
            seed: 5,
            ..TrainConfig::default()
        };
        let mut m1 = Model::tiny(8);
        let log1 = train(&mut m1, &ds, Some(&ds), &cfg).unwrap();
        let mut m2 = Model::tiny(8);
        let log2 = train(&mut m2, &ds, Some(&ds), &cfg).unwrap();
        assert_eq!(log1, log2);
    }

    #[test]
    fn evaluate_is_batch_partition_invariant() {
        let ds = synthetic_dataset(12, 50, 10).unwrap();
        let mut model = Model::tiny(9);
        let a = evaluate(&mut model, &ds, 7).unwrap();
        let b = evaluate(&mut model, &ds, 50).unwrap();
        let c = evaluate(&mut model, &ds, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(b, c);
    }

    #[test]
    fn untrained_accuracy_is_near_chance() {
        let ds = synthetic_dataset(13, 500, 10).unwrap();
        let mut model = Model::tiny(10);
        let acc = evaluate(&mut model, &ds, 100).unwrap();
        assert!((acc - 10.0).abs() <= 5.0, "accuracy {acc}");
    }

    #[test]
    fn one_batch_overfit() {
        // A tiny model must be able to memorize 32 fixed samples.
        let ds = synthetic_dataset(14, 32, 10).unwrap();
        let cfg = TrainConfig {
            task_optimizer: OptimizerConfig::adam(0.001),
            epochs: 200,
            batch_size: 32,
            seed: 3,
            ..TrainConfig::default()
        };
        let mut model = Model::tiny(11);
        let log = train(&mut model, &ds, None, &cfg).unwrap();
        let final_acc = log.records.last().unwrap().train_acc;
        assert!(final_acc >= 95.0, "train accuracy {final_acc}");
    }
}
