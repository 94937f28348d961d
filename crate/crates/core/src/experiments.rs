//! Monte-Carlo harness measuring how minimizing a kernel objective affects
//! feature-map similarity.
//!
//! Each episode draws `K1, K2 ~ U(-1,1)` and a fixed input `X ~ U(0,1)`,
//! minimizes the chosen objective over the kernel pair for a fixed number of
//! iterations, and records both the objective and the squared feature-map
//! inner product at every iteration. Episode `e` always draws from RNG
//! stream `e`, so results are independent of scheduling and worker count.

use crate::convsim::{conv_sim_value_and_grad, KernelBank, Spatial};
use crate::numerics::{self, mean_std, pearson, NumericsError, RngStream, Tensor};
use crate::optim::{minimize, OptimError, OptimizerConfig};
use crate::signal::{PaddingSpec, SignalError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("all episodes were dropped; nothing to summarize")]
    EmptySummary,
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

/// Which quantity the episode minimizes over the kernel pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Squared kernel inner product `<K1, K2>^2`.
    KernelSimilarity,
    /// Sum of squared full cross-correlation values over all lags.
    ConvSim,
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Objective::KernelSimilarity => write!(f, "kernel_similarity"),
            Objective::ConvSim => write!(f, "conv_sim"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub objective: Objective,
    /// Kernel length N.
    pub kernel_len: usize,
    /// Input length M.
    pub input_len: usize,
    /// Padding for the feature-map similarity metric (the objective itself
    /// is input-free).
    pub pad: PaddingSpec,
    pub optimizer: OptimizerConfig,
    pub iters: usize,
    pub episodes: usize,
    pub base_seed: u64,
}

pub const DEFAULT_INPUT_LEN: usize = 64;
pub const DEFAULT_EPISODES: usize = 1000;
pub const DEFAULT_BASE_SEED: u64 = 42;

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_len == 0 {
            return Err(ExperimentError::InvalidConfig("kernel_len must be >= 1".into()));
        }
        if self.kernel_len > self.input_len {
            return Err(ExperimentError::InvalidConfig(format!(
                "kernel_len {} exceeds input_len {}",
                self.kernel_len, self.input_len
            )));
        }
        if self.episodes == 0 {
            return Err(ExperimentError::InvalidConfig("episodes must be >= 1".into()));
        }
        if self.iters == 0 {
            return Err(ExperimentError::InvalidConfig("iters must be >= 1".into()));
        }
        self.pad.resolve(self.kernel_len)?;
        self.optimizer
            .validate()
            .map_err(ExperimentError::Optim)?;
        Ok(())
    }
}

/// Per-iteration record of one optimization episode. Values are taken at the
/// start of each iteration, so index 0 holds the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub objective_values: Vec<f64>,
    pub fm_similarity: Vec<f64>,
}

impl EpisodeTrace {
    pub fn initial_fm(&self) -> f64 {
        self.fm_similarity[0]
    }

    pub fn final_fm(&self) -> f64 {
        *self.fm_similarity.last().expect("non-empty trace")
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_values.last().expect("non-empty trace")
    }
}

/// Relative band below which a feature-map change counts as "unchanged"
/// rather than a decrease or increase, so float noise cannot fabricate a
/// direction.
pub const UNCHANGED_BAND: f64 = 1e-12;

/// Objective value below which an episode counts as converged ("kernel
/// orthogonality attained"). The increase statistic is defined only over
/// converged episodes: an episode whose objective never came near zero makes
/// no orthogonality claim, so its upward drift is recorded as "unchanged"
/// rather than as an increase. Decreases are counted unconditionally.
pub const CONVERGENCE_FLOOR: f64 = 1e-9;

/// Aggregated episode statistics, one row of the result tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    /// Mean/std of the per-episode Pearson correlation between the objective
    /// trajectory and the feature-map similarity trajectory.
    pub corr_mean: f64,
    pub corr_std: f64,
    /// Percentage of episodes whose final feature-map similarity is below
    /// its initial value.
    pub reduction_frequency: f64,
    /// Mean/std percentage decrease over decreasing episodes.
    pub decrease_mean: f64,
    pub decrease_std: f64,
    /// Mean/std percentage increase (positive magnitudes) over episodes that
    /// increased after converging (see [`CONVERGENCE_FLOOR`]).
    pub increase_mean: f64,
    pub increase_std: f64,
    /// Episodes that produced no trace (optimizer divergence).
    pub dropped_episodes: usize,
    /// Completed episodes whose correlation was undefined (constant
    /// trajectory); excluded from the correlation mean.
    pub undefined_correlations: usize,
    pub episodes: usize,
    pub decreased: usize,
    pub increased: usize,
    pub unchanged: usize,
}

/// One summarized experiment plus its raw per-episode traces
/// (`None` = dropped).
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub summary: MetricsSummary,
    pub episodes: Vec<Option<EpisodeTrace>>,
}

/// Runs one episode: sample, minimize, trace. The same `(config, index)`
/// always produces the same trace.
pub fn run_episode(cfg: &ExperimentConfig, episode_index: u64) -> Result<EpisodeTrace> {
    cfg.validate()?;
    let n = cfg.kernel_len;
    let mut rng = RngStream::new(cfg.base_seed, episode_index).rng();
    let k1 = numerics::sample_uniform_from(&mut rng, -1.0, 1.0, vec![n])?;
    let k2 = numerics::sample_uniform_from(&mut rng, -1.0, 1.0, vec![n])?;
    let x = numerics::sample_uniform_from(&mut rng, 0.0, 1.0, vec![cfg.input_len])?;

    let mut init = Vec::with_capacity(2 * n);
    init.extend_from_slice(k1.data());
    init.extend_from_slice(k2.data());
    let init = Tensor::new(vec![2, 1, n], init)?;

    let objective = |p: &Tensor| -> (f64, Tensor) {
        match cfg.objective {
            Objective::ConvSim => {
                let bank = KernelBank::new(2, 1, Spatial::OneD(n), p.clone())
                    .expect("episode bank shape is fixed");
                let lv = conv_sim_value_and_grad(&bank).expect("S=2 bank");
                (lv.value, lv.gradient.expect("gradient requested"))
            }
            Objective::KernelSimilarity => {
                let (a, b) = p.data().split_at(n);
                let ip = numerics::dot(a, b);
                let mut grad = Vec::with_capacity(2 * n);
                grad.extend(b.iter().map(|&v| 2.0 * ip * v));
                grad.extend(a.iter().map(|&v| 2.0 * ip * v));
                (
                    ip * ip,
                    Tensor::new(vec![2, 1, n], grad).expect("same shape"),
                )
            }
        }
    };

    let mut objective_values = Vec::with_capacity(cfg.iters);
    let mut fm_similarity = Vec::with_capacity(cfg.iters);
    let pad = cfg.pad;
    let xs = x.data().to_vec();
    let hook = |_it: usize, loss: f64, p: &Tensor| {
        let (a, b) = p.data().split_at(n);
        let ip = crate::signal::feature_inner_product(&xs, a, b, pad)
            .expect("validated padding and lengths");
        objective_values.push(loss);
        fm_similarity.push(ip * ip);
    };

    minimize(objective, init, cfg.optimizer, cfg.iters, hook)?;

    Ok(EpisodeTrace {
        objective_values,
        fm_similarity,
    })
}

/// Direction classification of a completed episode under the unchanged band.
fn classify(initial: f64, fin: f64) -> std::cmp::Ordering {
    let scale = f64::max(initial.abs(), fin.abs());
    if (fin - initial).abs() <= UNCHANGED_BAND * scale {
        std::cmp::Ordering::Equal
    } else if fin < initial {
        std::cmp::Ordering::Less
    } else {
        std::cmp::Ordering::Greater
    }
}

/// Aggregates per-episode traces into a table row. `None` entries are
/// dropped episodes; they count toward the episode total but toward no
/// direction class.
pub fn summarize(episodes: &[Option<EpisodeTrace>]) -> Result<MetricsSummary> {
    let total = episodes.len();
    let dropped = episodes.iter().filter(|e| e.is_none()).count();
    if dropped == total {
        return Err(ExperimentError::EmptySummary);
    }

    let mut correlations = Vec::new();
    let mut undefined = 0usize;
    let mut decrease_pcts = Vec::new();
    let mut increase_pcts = Vec::new();
    let mut decreased = 0usize;
    let mut increased = 0usize;
    let mut unchanged = 0usize;

    for trace in episodes.iter().flatten() {
        match pearson(&trace.objective_values, &trace.fm_similarity) {
            Ok(r) => correlations.push(r),
            Err(NumericsError::UndefinedCorrelation) | Err(NumericsError::TooFewPoints(_)) => {
                undefined += 1
            }
            Err(other) => return Err(other.into()),
        }
        let initial = trace.initial_fm();
        let fin = trace.final_fm();
        match classify(initial, fin) {
            std::cmp::Ordering::Less => {
                decreased += 1;
                let pct = 100.0 * (initial - fin) / initial;
                if pct.is_finite() {
                    decrease_pcts.push(pct);
                }
            }
            std::cmp::Ordering::Greater if trace.final_objective() <= CONVERGENCE_FLOOR => {
                increased += 1;
                let pct = 100.0 * (fin - initial) / initial;
                if pct.is_finite() {
                    increase_pcts.push(pct);
                }
            }
            _ => unchanged += 1,
        }
    }

    let (corr_mean, corr_std) = mean_std(&correlations);
    let (decrease_mean, decrease_std) = mean_std(&decrease_pcts);
    let (increase_mean, increase_std) = mean_std(&increase_pcts);

    Ok(MetricsSummary {
        corr_mean,
        corr_std,
        reduction_frequency: 100.0 * decreased as f64 / total as f64,
        decrease_mean,
        decrease_std,
        increase_mean,
        increase_std,
        dropped_episodes: dropped,
        undefined_correlations: undefined,
        episodes: total,
        decreased,
        increased,
        unchanged,
    })
}

/// Runs all episodes (in parallel; the result does not depend on worker
/// count) and summarizes them.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let episodes: Vec<Option<EpisodeTrace>> = (0..cfg.episodes as u64)
        .into_par_iter()
        .map(|e| match run_episode(cfg, e) {
            Ok(trace) => Ok(Some(trace)),
            Err(ExperimentError::Optim(OptimError::Divergence { .. })) => Ok(None),
            Err(other) => Err(other),
        })
        .collect::<Result<_>>()?;
    let summary = summarize(&episodes)?;
    Ok(ExperimentResult {
        config: cfg.clone(),
        summary,
        episodes,
    })
}

/// Writes raw traces: one row per (episode, iteration).
pub fn write_traces_csv<W: Write>(episodes: &[Option<EpisodeTrace>], mut w: W) -> Result<()> {
    writeln!(w, "episode,iteration,objective,fm_similarity")?;
    for (e, trace) in episodes.iter().enumerate() {
        if let Some(t) = trace {
            for (it, (obj, fm)) in t.objective_values.iter().zip(&t.fm_similarity).enumerate() {
                writeln!(w, "{e},{it},{obj},{fm}")?;
            }
        }
    }
    Ok(())
}

pub const SUMMARY_CSV_HEADER: &str = "label,n,optimizer,lr,iters,episodes,corr_mean,corr_std,\
reduction_frequency,decrease_mean,decrease_std,increase_mean,increase_std,\
dropped_episodes,undefined_correlations";

/// Appends one summary row in the layout of the result tables.
pub fn write_summary_row<W: Write>(
    label: &str,
    cfg: &ExperimentConfig,
    s: &MetricsSummary,
    mut w: W,
) -> Result<()> {
    writeln!(
        w,
        "{label},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        cfg.kernel_len,
        cfg.optimizer.kind,
        cfg.optimizer.lr,
        cfg.iters,
        cfg.episodes,
        s.corr_mean,
        s.corr_std,
        s.reduction_frequency,
        s.decrease_mean,
        s.decrease_std,
        s.increase_mean,
        s.increase_std,
        s.dropped_episodes,
        s.undefined_correlations,
    )?;
    Ok(())
}

/// Named experiment configurations matching the published hyperparameter
/// tables: `table1_*` minimize kernel similarity, `table2_*` minimize the
/// convolutional similarity (both with the full-padding metric), and
/// `appendix_*` repeat the latter with the valid-padding metric.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let (objective, pad, n, optimizer, iters) = match name {
        "table1_n3_adam" => (Objective::KernelSimilarity, PaddingSpec::Full, 3, OptimizerConfig::adam(0.1), 250),
        "table1_n3_sgd" => (Objective::KernelSimilarity, PaddingSpec::Full, 3, OptimizerConfig::sgd(0.1), 250),
        "table1_n9_adam" => (Objective::KernelSimilarity, PaddingSpec::Full, 9, OptimizerConfig::adam(0.1), 250),
        "table1_n9_sgd" => (Objective::KernelSimilarity, PaddingSpec::Full, 9, OptimizerConfig::sgd(0.1), 250),
        "table1_n16_adam" => (Objective::KernelSimilarity, PaddingSpec::Full, 16, OptimizerConfig::adam(0.1), 250),
        "table1_n16_sgd" => (Objective::KernelSimilarity, PaddingSpec::Full, 16, OptimizerConfig::sgd(0.1), 300),
        "table2_n3_adam" => (Objective::ConvSim, PaddingSpec::Full, 3, OptimizerConfig::adam(0.1), 300),
        "table2_n3_sgd" => (Objective::ConvSim, PaddingSpec::Full, 3, OptimizerConfig::sgd(0.2), 350),
        "table2_n9_adam" => (Objective::ConvSim, PaddingSpec::Full, 9, OptimizerConfig::adam(0.1), 400),
        "table2_n9_sgd" => (Objective::ConvSim, PaddingSpec::Full, 9, OptimizerConfig::sgd(0.07), 550),
        "table2_n16_adam" => (Objective::ConvSim, PaddingSpec::Full, 16, OptimizerConfig::adam(0.2), 450),
        "table2_n16_sgd" => (Objective::ConvSim, PaddingSpec::Full, 16, OptimizerConfig::sgd(0.035), 1500),
        "appendix_n3_adam" => (Objective::ConvSim, PaddingSpec::Valid, 3, OptimizerConfig::adam(0.1), 300),
        "appendix_n3_sgd" => (Objective::ConvSim, PaddingSpec::Valid, 3, OptimizerConfig::sgd(0.1), 300),
        "appendix_n9_adam" => (Objective::ConvSim, PaddingSpec::Valid, 9, OptimizerConfig::adam(0.1), 300),
        "appendix_n9_sgd" => (Objective::ConvSim, PaddingSpec::Valid, 9, OptimizerConfig::sgd(0.05), 400),
        "appendix_n16_adam" => (Objective::ConvSim, PaddingSpec::Valid, 16, OptimizerConfig::adam(0.05), 500),
        "appendix_n16_sgd" => (Objective::ConvSim, PaddingSpec::Valid, 16, OptimizerConfig::sgd(0.01), 700),
        _ => return None,
    };
    Some(ExperimentConfig {
        objective,
        kernel_len: n,
        input_len: DEFAULT_INPUT_LEN,
        pad,
        optimizer,
        iters,
        episodes: DEFAULT_EPISODES,
        base_seed: DEFAULT_BASE_SEED,
    })
}

pub fn preset_names() -> Vec<&'static str> {
    vec![
        "table1_n3_adam",
        "table1_n3_sgd",
        "table1_n9_adam",
        "table1_n9_sgd",
        "table1_n16_adam",
        "table1_n16_sgd",
        "table2_n3_adam",
        "table2_n3_sgd",
        "table2_n9_adam",
        "table2_n9_sgd",
        "table2_n16_adam",
        "table2_n16_sgd",
        "appendix_n3_adam",
        "appendix_n3_sgd",
        "appendix_n9_adam",
        "appendix_n9_sgd",
        "appendix_n16_adam",
        "appendix_n16_sgd",
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg(objective: Objective) -> ExperimentConfig {
        ExperimentConfig {
            objective,
            kernel_len: 3,
            input_len: 16,
            pad: PaddingSpec::Full,
            optimizer: OptimizerConfig::adam(0.1),
            iters: 50,
            episodes: 16,
            base_seed: 7,
        }
    }

    #[test]
    fn episode_is_deterministic() {
        let cfg = tiny_cfg(Objective::ConvSim);
        let a = run_episode(&cfg, 3).unwrap();
        let b = run_episode(&cfg, 3).unwrap();
        assert_eq!(a, b);
        let c = run_episode(&cfg, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn trace_shape_contract() {
        let cfg = tiny_cfg(Objective::ConvSim);
        let t = run_episode(&cfg, 0).unwrap();
        assert_eq!(t.objective_values.len(), cfg.iters);
        assert_eq!(t.fm_similarity.len(), cfg.iters);
        assert_eq!(t.initial_fm(), t.fm_similarity[0]);
        assert_eq!(t.final_fm(), t.fm_similarity[cfg.iters - 1]);
    }

    #[test]
    fn conv_sim_episode_minimizes_objective() {
        let mut cfg = tiny_cfg(Objective::ConvSim);
        cfg.iters = 300;
        cfg.input_len = 64;
        let t = run_episode(&cfg, 1).unwrap();
        assert!(t.final_objective() < 1e-5, "{:e}", t.final_objective());
        assert!(t.final_fm() < t.initial_fm());
    }

    #[test]
    fn kernel_similarity_episode_attains_orthogonality() {
        let mut cfg = tiny_cfg(Objective::KernelSimilarity);
        cfg.iters = 250;
        cfg.input_len = 64;
        for e in 0..10 {
            let t = run_episode(&cfg, e).unwrap();
            assert!(t.final_objective() < 1e-6, "episode {e}: {:e}", t.final_objective());
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = tiny_cfg(Objective::ConvSim);
        cfg.kernel_len = 32;
        assert!(matches!(
            run_episode(&cfg, 0),
            Err(ExperimentError::InvalidConfig(_))
        ));
        let mut cfg = tiny_cfg(Objective::ConvSim);
        cfg.episodes = 0;
        assert!(run_experiment(&cfg).is_err());
    }

    #[test]
    fn summarize_single_episode_arithmetic() {
        let trace = EpisodeTrace {
            objective_values: vec![4.0, 3.0, 2.0],
            fm_similarity: vec![2.0, 1.5, 1.0],
        };
        let s = summarize(&[Some(trace)]).unwrap();
        assert_eq!(s.reduction_frequency, 100.0);
        assert_eq!(s.decrease_mean, 50.0);
        assert_eq!(s.decrease_std, 0.0);
        assert_eq!(s.increase_mean, 0.0);
        assert_eq!(s.increased, 0);
        assert!((s.corr_mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn summarize_limiting_pattern_all_to_zero() {
        let episodes: Vec<Option<EpisodeTrace>> = (0..5)
            .map(|i| {
                Some(EpisodeTrace {
                    objective_values: vec![1.0 + i as f64, 0.5, 0.0],
                    fm_similarity: vec![3.0 + i as f64, 1.0, 0.0],
                })
            })
            .collect();
        let s = summarize(&episodes).unwrap();
        assert_eq!(s.reduction_frequency, 100.0);
        assert_eq!(s.decrease_mean, 100.0);
        assert_eq!(s.increase_mean, 0.0);
        assert_eq!(s.increase_std, 0.0);
    }

    #[test]
    fn summarize_counts_are_conserved() {
        let up = EpisodeTrace {
            objective_values: vec![1.0, 0.0],
            fm_similarity: vec![1.0, 2.0],
        };
        let down = EpisodeTrace {
            objective_values: vec![2.0, 1.0],
            fm_similarity: vec![2.0, 1.0],
        };
        let flat = EpisodeTrace {
            objective_values: vec![1.0, 2.0],
            fm_similarity: vec![1.0, 1.0],
        };
        let episodes = vec![Some(up), Some(down), Some(flat), None];
        let s = summarize(&episodes).unwrap();
        assert_eq!(s.decreased + s.increased + s.unchanged + s.dropped_episodes, s.episodes);
        assert_eq!(s.decreased, 1);
        assert_eq!(s.increased, 1);
        assert_eq!(s.increase_mean, 100.0);
        assert_eq!(s.unchanged, 1);
        assert_eq!(s.dropped_episodes, 1);
        // The flat fm trace has an undefined correlation and is dropped from
        // the correlation mean.
        assert_eq!(s.undefined_correlations, 1);
    }

    #[test]
    fn increase_requires_convergence() {
        // An episode whose objective never converged makes no orthogonality
        // claim; its upward drift is recorded as unchanged.
        let drifted = EpisodeTrace {
            objective_values: vec![3.0, 1.0],
            fm_similarity: vec![1e-4, 3e-3],
        };
        let converged_up = EpisodeTrace {
            objective_values: vec![3.0, 1e-12],
            fm_similarity: vec![1e-4, 3e-3],
        };
        let s = summarize(&[Some(drifted), Some(converged_up)]).unwrap();
        assert_eq!(s.increased, 1);
        assert_eq!(s.unchanged, 1);
    }

    #[test]
    fn summarize_empty_errors() {
        assert!(matches!(
            summarize(&[None, None]),
            Err(ExperimentError::EmptySummary)
        ));
    }

    #[test]
    fn experiment_is_reproducible_and_order_insensitive() {
        let cfg = tiny_cfg(Objective::ConvSim);
        let r1 = run_experiment(&cfg).unwrap();
        let r2 = run_experiment(&cfg).unwrap();
        assert_eq!(r1.summary, r2.summary);

        // Running episodes in reverse order and re-assembling by index must
        // give the identical summary.
        let mut episodes: Vec<Option<EpisodeTrace>> = vec![None; cfg.episodes];
        for e in (0..cfg.episodes as u64).rev() {
            episodes[e as usize] = Some(run_episode(&cfg, e).unwrap());
        }
        let s = summarize(&episodes).unwrap();
        assert_eq!(r1.summary, s);
    }

    #[test]
    fn presets_resolve_and_validate() {
        for name in preset_names() {
            let cfg = preset(name).expect(name);
            cfg.validate().expect(name);
        }
        assert!(preset("nonsense").is_none());
    }

    #[test]
    fn traces_csv_layout() {
        let cfg = tiny_cfg(Objective::ConvSim);
        let trace = run_episode(&cfg, 0).unwrap();
        let mut buf = Vec::new();
        write_traces_csv(&[Some(trace)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("episode,iteration,objective,fm_similarity"));
        assert_eq!(text.lines().count(), 1 + cfg.iters);
        let first = lines.next().unwrap();
        assert!(first.starts_with("0,0,"));
    }
}
