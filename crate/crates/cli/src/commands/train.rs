//! The `train` subcommand: build a model, apply the configured
//! similarity-minimization scheme, train, and persist the log + checkpoint.

use crate::config::{
    load_config_value, train_config, train_config_to_value, train_preset, DataSource,
    TrainRunConfig,
};
use crate::manifest::ArtifactWriter;
use crate::{CliError, CliResult, CommonRunArgs};
use convsim_core::data::{load_cifar10, synthetic_split, Dataset};
use convsim_core::nn::{checkpoint, evaluate, train_from, write_log_csv, Model};
use convsim_core::numerics::RngStream;
use std::path::{Path, PathBuf};

/// Stream indices for dataset subsetting, distinct from training streams.
const TRAIN_SUBSET_STREAM: u64 = 1 << 32;
const TEST_SUBSET_STREAM: u64 = (1 << 32) + 1;

fn resolve_config(run: &CommonRunArgs) -> CliResult<TrainRunConfig> {
    let mut cfg = match (&run.config, &run.preset) {
        (Some(path), None) => train_config(&load_config_value(path)?)?,
        (None, Some(name)) => train_preset(name).ok_or_else(|| {
            CliError::Usage(format!(
                "unknown preset `{name}`; run `convsim presets` for the list"
            ))
        })?,
        _ => {
            return Err(CliError::Usage(
                "exactly one of --config or --preset is required".into(),
            ))
        }
    };
    if let Some(seed) = run.seed {
        cfg.train.seed = seed;
        cfg.model_seed = seed;
    }
    Ok(cfg)
}

fn cifar_dir(flag: Option<&Path>) -> Option<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os("CIFAR10_DIR").map(PathBuf::from))
}

fn load_data(cfg: &TrainRunConfig, dir: Option<&Path>) -> CliResult<(Dataset, Dataset, String)> {
    let use_cifar = match cfg.data {
        DataSource::Cifar10 => true,
        DataSource::Synthetic => false,
        DataSource::Auto => dir.is_some_and(|d| d.join("data_batch_1.bin").exists()),
    };
    if use_cifar {
        let dir = dir.ok_or_else(|| {
            CliError::Usage(
                "dataset directory required: expected data_batch_1.bin..data_batch_5.bin and \
                 test_batch.bin under --data-dir (or set CIFAR10_DIR)"
                    .into(),
            )
        })?;
        let (mut train, mut test) =
            load_cifar10(dir).map_err(|e| CliError::Failed(e.to_string()))?;
        if cfg.train_count > 0 && cfg.train_count < train.len() {
            train = train
                .subset(cfg.train_count, RngStream::new(cfg.train.seed, TRAIN_SUBSET_STREAM))
                .map_err(|e| CliError::Failed(e.to_string()))?;
        }
        if cfg.test_count > 0 && cfg.test_count < test.len() {
            test = test
                .subset(cfg.test_count, RngStream::new(cfg.train.seed, TEST_SUBSET_STREAM))
                .map_err(|e| CliError::Failed(e.to_string()))?;
        }
        Ok((train, test, format!("cifar10:{}", dir.display())))
    } else {
        let train_count = if cfg.train_count > 0 { cfg.train_count } else { 5000 };
        let test_count = if cfg.test_count > 0 { cfg.test_count } else { 1000 };
        let (train, test) = synthetic_split(cfg.train.seed, train_count, test_count, 10)
            .map_err(|e| CliError::Failed(e.to_string()))?;
        Ok((train, test, "synthetic".into()))
    }
}

pub fn run(run: CommonRunArgs, data_dir: Option<PathBuf>, resume: Option<PathBuf>) -> CliResult<()> {
    let cfg = resolve_config(&run)?;

    if run.dry_run {
        let model = cfg.model.build(cfg.model_seed);
        println!("model parameters: {}", model.parameter_count());
        println!(
            "reference counts: cnn1 {} / cnn2 {}",
            Model::cnn1(0).parameter_count(),
            Model::cnn2(0).parameter_count()
        );
        println!(
            "{}",
            serde_json::to_string_pretty(&train_config_to_value(&cfg))
                .expect("serializable config")
        );
        return Ok(());
    }

    let dir = cifar_dir(data_dir.as_deref());
    let (train_ds, test_ds, data_label) = load_data(&cfg, dir.as_deref())?;
    println!(
        "data: {data_label} ({} train / {} test)",
        train_ds.len(),
        test_ds.len()
    );

    let (mut model, start_epoch) = match &resume {
        Some(path) => {
            let (model, epoch) = checkpoint::load(path)
                .map_err(|e| CliError::Failed(format!("cannot resume: {e}")))?;
            println!("resumed from {} at epoch {}", path.display(), epoch);
            (model, epoch)
        }
        None => (cfg.model.build(cfg.model_seed), 0),
    };

    let log = train_from(&mut model, &train_ds, Some(&test_ds), &cfg.train, start_epoch)
        .map_err(|e| CliError::Failed(e.to_string()))?;
    if let Some(init) = &log.init {
        println!(
            "iterative init: {} iterations, conv_sim {:.6e} -> {:.6e}",
            init.iterations, init.initial_loss, init.final_loss
        );
    }
    if let Some(last) = log.records.last() {
        println!(
            "epoch {}: task loss {:.4}, train acc {:.2}%, test acc {}, conv_sim {:.4e}",
            last.epoch,
            last.task_loss,
            last.train_acc,
            last.test_acc
                .map(|v| format!("{v:.2}%"))
                .unwrap_or_else(|| "-".into()),
            last.conv_sim
        );
    }
    let final_eval = evaluate(&mut model, &test_ds, cfg.train.batch_size)
        .map_err(|e| CliError::Failed(e.to_string()))?;
    println!("final test accuracy: {final_eval:.2}%");

    let mut writer = ArtifactWriter::new(&run.out_dir, "train", cfg.train.seed)?;
    let mut log_csv = Vec::new();
    write_log_csv(&log, &mut log_csv).expect("vec write");
    writer.write("log.csv", &log_csv)?;
    writer.write(
        "log.json",
        &serde_json::to_vec_pretty(&log).expect("serializable log"),
    )?;
    let ckpt_path = writer.dir().join("model.ckpt.json");
    checkpoint::save(&model, cfg.train.epochs, &ckpt_path)
        .map_err(|e| CliError::Failed(e.to_string()))?;
    writer.record(&ckpt_path);
    writer.finish(train_config_to_value(&cfg))?;
    Ok(())
}
