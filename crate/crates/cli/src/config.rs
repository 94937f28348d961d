//! Configuration files (flat key=value text or JSON), their resolution into
//! typed configs, and the bundled training presets.

use crate::manifest::unwrap_manifest;
use crate::{CliError, CliResult};
use convsim_core::experiments::{ExperimentConfig, Objective};
use convsim_core::nn::TrainConfig;
use convsim_core::optim::OptimizerConfig;
use convsim_core::signal::PaddingSpec;
use serde_json::{Map, Value};
use std::path::Path;

/// Reads a config file: JSON if it starts with `{` (a manifest is unwrapped
/// to its embedded config), otherwise `key = value` lines with `#` comments.
pub fn load_config_value(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let value: Value = serde_json::from_str(trimmed)
            .map_err(|e| CliError::Usage(format!("{}: invalid JSON: {e}", path.display())))?;
        return Ok(unwrap_manifest(value));
    }
    parse_key_values(&text, path)
}

fn parse_key_values(text: &str, path: &Path) -> CliResult<Value> {
    let mut map = Map::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!(
                "{}:{}: expected `key = value`, got `{raw}`",
                path.display(),
                lineno + 1
            ))
        })?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(CliError::Usage(format!(
                "{}:{}: empty key",
                path.display(),
                lineno + 1
            )));
        }
        map.insert(key, sniff_scalar(value.trim()));
    }
    Ok(Value::Object(map))
}

fn sniff_scalar(s: &str) -> Value {
    if let Ok(i) = s.parse::<i64>() {
        return Value::from(i);
    }
    if let Ok(f) = s.parse::<f64>() {
        if let Some(n) = serde_json::Number::from_f64(f) {
            return Value::Number(n);
        }
    }
    match s {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        other => Value::String(other.to_string()),
    }
}

struct Fields<'a> {
    map: &'a Map<String, Value>,
}

impl<'a> Fields<'a> {
    fn new(value: &'a Value) -> CliResult<Self> {
        match value {
            Value::Object(map) => Ok(Self { map }),
            other => Err(CliError::Usage(format!(
                "config must be an object of fields, got {other}"
            ))),
        }
    }

    fn str(&self, key: &str) -> CliResult<Option<String>> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(other) => Err(CliError::Usage(format!(
                "field `{key}`: expected a string, got {other}"
            ))),
        }
    }

    fn required_str(&self, key: &str) -> CliResult<String> {
        self.str(key)?
            .ok_or_else(|| CliError::Usage(format!("missing required field `{key}`")))
    }

    fn usize(&self, key: &str) -> CliResult<Option<usize>> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_u64()
                .map(|u| Some(u as usize))
                .ok_or_else(|| CliError::Usage(format!(
                    "field `{key}`: expected a nonnegative integer, got {v}"
                ))),
        }
    }

    fn required_usize(&self, key: &str) -> CliResult<usize> {
        self.usize(key)?
            .ok_or_else(|| CliError::Usage(format!("missing required field `{key}`")))
    }

    fn u64(&self, key: &str) -> CliResult<Option<u64>> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v.as_u64().map(Some).ok_or_else(|| {
                CliError::Usage(format!("field `{key}`: expected an integer, got {v}"))
            }),
        }
    }

    fn f64(&self, key: &str) -> CliResult<Option<f64>> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v.as_f64().map(Some).ok_or_else(|| {
                CliError::Usage(format!("field `{key}`: expected a number, got {v}"))
            }),
        }
    }

    fn required_f64(&self, key: &str) -> CliResult<f64> {
        self.f64(key)?
            .ok_or_else(|| CliError::Usage(format!("missing required field `{key}`")))
    }
}

fn parse_objective(s: &str) -> CliResult<Objective> {
    match s {
        "conv_sim" => Ok(Objective::ConvSim),
        "kernel_similarity" => Ok(Objective::KernelSimilarity),
        other => Err(CliError::Usage(format!(
            "field `objective`: expected conv_sim or kernel_similarity, got `{other}`"
        ))),
    }
}

fn parse_optimizer(kind: &str, lr: f64, momentum: f64) -> CliResult<OptimizerConfig> {
    let mut cfg = match kind {
        "adam" => OptimizerConfig::adam(lr),
        "sgd" => OptimizerConfig::sgd(lr),
        other => {
            return Err(CliError::Usage(format!(
                "optimizer: expected adam or sgd, got `{other}`"
            )))
        }
    };
    cfg.momentum = momentum;
    Ok(cfg)
}

fn parse_padding(value: Option<&Value>) -> CliResult<PaddingSpec> {
    match value {
        None | Some(Value::Null) => Ok(PaddingSpec::Full),
        Some(Value::String(s)) => match s.as_str() {
            "full" => Ok(PaddingSpec::Full),
            "valid" => Ok(PaddingSpec::Valid),
            "same" => Ok(PaddingSpec::Same),
            other => Err(CliError::Usage(format!(
                "field `padding`: expected full/valid/same or an integer, got `{other}`"
            ))),
        },
        Some(v) => v
            .as_u64()
            .map(|p| PaddingSpec::Explicit(p as usize))
            .ok_or_else(|| {
                CliError::Usage(format!("field `padding`: expected a padding, got {v}"))
            }),
    }
}

/// Resolves a Monte-Carlo experiment config from a parsed file. Accepts
/// both the flat file schema and the serialized config a manifest embeds.
pub fn mc_config(value: &Value) -> CliResult<ExperimentConfig> {
    if let Ok(cfg) = serde_json::from_value::<ExperimentConfig>(value.clone()) {
        cfg.validate()
            .map_err(|e| CliError::Usage(format!("invalid experiment config: {e}")))?;
        return Ok(cfg);
    }
    let f = Fields::new(value)?;
    let cfg = ExperimentConfig {
        objective: parse_objective(&f.required_str("objective")?)?,
        kernel_len: f.required_usize("kernel_len")?,
        input_len: f
            .usize("input_len")?
            .unwrap_or(convsim_core::experiments::DEFAULT_INPUT_LEN),
        pad: parse_padding(f.map.get("padding"))?,
        optimizer: parse_optimizer(
            &f.required_str("optimizer")?,
            f.required_f64("lr")?,
            f.f64("momentum")?.unwrap_or(0.0),
        )?,
        iters: f.required_usize("iters")?,
        episodes: f
            .usize("episodes")?
            .unwrap_or(convsim_core::experiments::DEFAULT_EPISODES),
        base_seed: f
            .u64("seed")?
            .unwrap_or(convsim_core::experiments::DEFAULT_BASE_SEED),
    };
    cfg.validate()
        .map_err(|e| CliError::Usage(format!("invalid experiment config: {e}")))?;
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Cnn1,
    Cnn2,
    Tiny,
}

impl ModelKind {
    pub fn build(self, seed: u64) -> convsim_core::nn::Model {
        match self {
            ModelKind::Cnn1 => convsim_core::nn::Model::cnn1(seed),
            ModelKind::Cnn2 => convsim_core::nn::Model::cnn2(seed),
            ModelKind::Tiny => convsim_core::nn::Model::tiny(seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    /// Real batches when a data directory is available, synthetic otherwise.
    Auto,
    Synthetic,
    Cifar10,
}

/// Fully resolved training run description.
#[derive(Debug, Clone)]
pub struct TrainRunConfig {
    pub model: ModelKind,
    pub model_seed: u64,
    pub data: DataSource,
    /// Training subset size; 0 keeps everything.
    pub train_count: usize,
    pub test_count: usize,
    pub train: TrainConfig,
}

pub fn train_config(value: &Value) -> CliResult<TrainRunConfig> {
    let f = Fields::new(value)?;
    let model = match f.required_str("model")?.as_str() {
        "cnn1" => ModelKind::Cnn1,
        "cnn2" => ModelKind::Cnn2,
        "tiny" => ModelKind::Tiny,
        other => {
            return Err(CliError::Usage(format!(
                "field `model`: expected cnn1, cnn2, or tiny, got `{other}`"
            )))
        }
    };
    let data = match f.str("data")?.as_deref().unwrap_or("auto") {
        "auto" => DataSource::Auto,
        "synthetic" => DataSource::Synthetic,
        "cifar10" => DataSource::Cifar10,
        other => {
            return Err(CliError::Usage(format!(
                "field `data`: expected auto, synthetic, or cifar10, got `{other}`"
            )))
        }
    };
    let seed = f.u64("seed")?.unwrap_or(0);
    let train = TrainConfig {
        init_iters: f.usize("init_iters")?.unwrap_or(0),
        beta: f.f64("beta")?.unwrap_or(0.0),
        task_optimizer: parse_optimizer(
            f.str("task_optimizer")?.as_deref().unwrap_or("sgd"),
            f.f64("task_lr")?.unwrap_or(0.01),
            f.f64("task_momentum")?.unwrap_or(0.0),
        )?,
        convsim_optimizer: parse_optimizer(
            f.str("convsim_optimizer")?.as_deref().unwrap_or("adam"),
            f.f64("convsim_lr")?.unwrap_or(0.001),
            0.0,
        )?,
        epochs: f.usize("epochs")?.unwrap_or(10),
        batch_size: f.usize("batch_size")?.unwrap_or(128),
        seed,
    };
    train
        .validate()
        .map_err(|e| CliError::Usage(format!("invalid training config: {e}")))?;
    Ok(TrainRunConfig {
        model,
        model_seed: f.u64("model_seed")?.unwrap_or(seed),
        data,
        train_count: f.usize("train_count")?.unwrap_or(5000),
        test_count: f.usize("test_count")?.unwrap_or(1000),
        train,
    })
}

/// Serializes a resolved training config back into the file schema (used for
/// manifests).
pub fn train_config_to_value(cfg: &TrainRunConfig) -> Value {
    let mut map = Map::new();
    map.insert(
        "model".into(),
        Value::from(match cfg.model {
            ModelKind::Cnn1 => "cnn1",
            ModelKind::Cnn2 => "cnn2",
            ModelKind::Tiny => "tiny",
        }),
    );
    map.insert(
        "data".into(),
        Value::from(match cfg.data {
            DataSource::Auto => "auto",
            DataSource::Synthetic => "synthetic",
            DataSource::Cifar10 => "cifar10",
        }),
    );
    map.insert("model_seed".into(), Value::from(cfg.model_seed));
    map.insert("train_count".into(), Value::from(cfg.train_count as u64));
    map.insert("test_count".into(), Value::from(cfg.test_count as u64));
    map.insert("init_iters".into(), Value::from(cfg.train.init_iters as u64));
    map.insert("beta".into(), Value::from(cfg.train.beta));
    map.insert(
        "task_optimizer".into(),
        Value::from(cfg.train.task_optimizer.kind.to_string()),
    );
    map.insert("task_lr".into(), Value::from(cfg.train.task_optimizer.lr));
    map.insert(
        "task_momentum".into(),
        Value::from(cfg.train.task_optimizer.momentum),
    );
    map.insert(
        "convsim_optimizer".into(),
        Value::from(cfg.train.convsim_optimizer.kind.to_string()),
    );
    map.insert(
        "convsim_lr".into(),
        Value::from(cfg.train.convsim_optimizer.lr),
    );
    map.insert("epochs".into(), Value::from(cfg.train.epochs as u64));
    map.insert("batch_size".into(), Value::from(cfg.train.batch_size as u64));
    map.insert("seed".into(), Value::from(cfg.train.seed));
    Value::Object(map)
}

/// Bundled training configurations. Desk-scale presets use a 5000/1000
/// subset for 10 epochs; `_paper` variants use the full set with the
/// published batch size and epoch count.
pub fn train_preset(name: &str) -> Option<TrainRunConfig> {
    let (model, desk) = match name.to_ascii_lowercase().as_str() {
        "cnn1_baseline" | "cnn1_i500" | "cnn1_beta" => (ModelKind::Cnn1, true),
        "cnn2_baseline" | "cnn2_i500" | "cnn2_beta" => (ModelKind::Cnn2, true),
        "cnn1_baseline_paper" | "cnn1_i500_paper" | "cnn1_beta_paper" => (ModelKind::Cnn1, false),
        "cnn2_baseline_paper" | "cnn2_i500_paper" | "cnn2_beta_paper" => (ModelKind::Cnn2, false),
        "tiny_smoke" => (ModelKind::Tiny, true),
        _ => return None,
    };
    let lower = name.to_ascii_lowercase();
    let mut train = TrainConfig {
        seed: 0,
        ..TrainConfig::default()
    };
    if lower.contains("_i500") {
        train.init_iters = 500;
        train.convsim_optimizer = OptimizerConfig::adam(0.001);
    }
    if lower.contains("_beta") {
        train.beta = 0.001;
    }
    if !desk {
        train.epochs = 100;
        train.batch_size = 512;
    }
    let mut cfg = TrainRunConfig {
        model,
        model_seed: 0,
        data: DataSource::Auto,
        train_count: if desk { 5000 } else { 0 },
        test_count: if desk { 1000 } else { 0 },
        train,
    };
    if lower == "tiny_smoke" {
        cfg.data = DataSource::Synthetic;
        cfg.train_count = 512;
        cfg.test_count = 128;
        cfg.train.epochs = 2;
        cfg.train.batch_size = 64;
    }
    Some(cfg)
}

pub fn train_preset_names() -> Vec<&'static str> {
    vec![
        "cnn1_baseline",
        "cnn1_i500",
        "cnn1_beta",
        "cnn2_baseline",
        "cnn2_i500",
        "cnn2_beta",
        "cnn1_baseline_paper",
        "cnn1_i500_paper",
        "cnn1_beta_paper",
        "cnn2_baseline_paper",
        "cnn2_i500_paper",
        "cnn2_beta_paper",
        "tiny_smoke",
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_parsing_with_comments() {
        let text = "# comment\nobjective = conv_sim\nkernel_len = 3\noptimizer = adam\nlr = 0.1\niters = 300\nepisodes=5\n";
        let value = parse_key_values(text, Path::new("test.cfg")).unwrap();
        let cfg = mc_config(&value).unwrap();
        assert_eq!(cfg.objective, Objective::ConvSim);
        assert_eq!(cfg.kernel_len, 3);
        assert_eq!(cfg.episodes, 5);
        assert_eq!(cfg.pad, PaddingSpec::Full);
    }

    #[test]
    fn malformed_line_reports_location() {
        let err = parse_key_values("objective conv_sim\n", Path::new("bad.cfg")).unwrap_err();
        assert!(err.to_string().contains("bad.cfg:1"), "{err}");
    }

    #[test]
    fn missing_field_is_named() {
        let value = parse_key_values("objective = conv_sim\n", Path::new("x.cfg")).unwrap();
        let err = mc_config(&value).unwrap_err();
        assert!(err.to_string().contains("kernel_len"), "{err}");
    }

    #[test]
    fn padding_variants() {
        for (text, expect) in [
            ("full", PaddingSpec::Full),
            ("valid", PaddingSpec::Valid),
            ("same", PaddingSpec::Same),
        ] {
            let v = parse_key_values(
                &format!("objective = conv_sim\nkernel_len = 3\noptimizer = adam\nlr = 0.1\niters = 10\npadding = {text}\n"),
                Path::new("p.cfg"),
            )
            .unwrap();
            assert_eq!(mc_config(&v).unwrap().pad, expect);
        }
        let v = parse_key_values(
            "objective = conv_sim\nkernel_len = 3\noptimizer = adam\nlr = 0.1\niters = 10\npadding = 1\n",
            Path::new("p.cfg"),
        )
        .unwrap();
        assert_eq!(mc_config(&v).unwrap().pad, PaddingSpec::Explicit(1));
    }

    #[test]
    fn train_presets_resolve() {
        for name in train_preset_names() {
            let cfg = train_preset(name).expect(name);
            cfg.train.validate().expect(name);
        }
        assert!(train_preset("cnn1_I500").is_some());
        assert!(train_preset("nope").is_none());

        let i500 = train_preset("cnn1_i500").unwrap();
        assert_eq!(i500.train.init_iters, 500);
        assert_eq!(i500.train.convsim_optimizer.lr, 0.001);
        let beta = train_preset("cnn1_beta").unwrap();
        assert_eq!(beta.train.beta, 0.001);
        let paper = train_preset("cnn2_i500_paper").unwrap();
        assert_eq!(paper.train.batch_size, 512);
        assert_eq!(paper.train.epochs, 100);
        assert_eq!(paper.train_count, 0);
    }

    #[test]
    fn train_config_round_trips_through_value() {
        let cfg = train_preset("cnn1_i500").unwrap();
        let value = train_config_to_value(&cfg);
        let back = train_config(&value).unwrap();
        assert_eq!(back.train, cfg.train);
        assert_eq!(back.model, cfg.model);
        assert_eq!(back.train_count, cfg.train_count);
    }
}
