//! The `minimize` subcommand: standalone convolutional-similarity
//! minimization on a described kernel bank with a before/after report.

use crate::manifest::ArtifactWriter;
use crate::{CliError, CliResult};
use convsim_core::convsim::{
    conv_sim_bank, conv_sim_pair, conv_sim_value_and_grad, KernelBank, Spatial,
};
use convsim_core::numerics::{sample_uniform, RngStream, Tensor};
use convsim_core::optim::{minimize, OptimizerConfig};
use serde::Serialize;
use std::path::PathBuf;

pub struct MinimizeArgs {
    pub kernels: usize,
    pub channels: usize,
    pub size: String,
    pub optimizer: String,
    pub lr: f64,
    pub iters: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

#[derive(Debug, Serialize)]
struct PairResidual {
    i: usize,
    j: usize,
    /// Summed squared correlation over all channel pairs and lags.
    residual: f64,
    /// Largest absolute correlation value over lags.
    max_lag_value: f64,
}

#[derive(Debug, Serialize)]
struct MinimizeReport {
    kernels: usize,
    channels: usize,
    spatial: Vec<usize>,
    optimizer: String,
    lr: f64,
    iters: usize,
    seed: u64,
    initial_loss: f64,
    final_loss: f64,
    pairs: Vec<PairResidual>,
}

fn parse_spatial(size: &str) -> CliResult<Spatial> {
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("--size: `{s}` is not a positive integer")))
    };
    match size.split_once(['x', 'X']) {
        Some((h, w)) => Ok(Spatial::TwoD(parse(h)?, parse(w)?)),
        None => Ok(Spatial::OneD(parse(size)?)),
    }
}

fn channel_tensor(bank: &KernelBank, i: usize, c: usize) -> Tensor {
    let shape = match bank.spatial() {
        Spatial::OneD(n) => vec![n],
        Spatial::TwoD(h, w) => vec![h, w],
    };
    Tensor::new(shape, bank.channel(i, c).to_vec()).expect("channel slice")
}

/// Largest absolute full cross-correlation value over all lags.
fn max_abs_lag(a: &Tensor, b: &Tensor, spatial: Spatial) -> f64 {
    let (h, w) = spatial.hw();
    let (hi, wi) = (h as i64, w as i64);
    let (ad, bd) = (a.data(), b.data());
    let mut worst = 0.0f64;
    for du in (1 - hi)..hi {
        for dv in (1 - wi)..wi {
            let mut acc = 0.0;
            for r in 0..hi {
                let r2 = r + du;
                if r2 < 0 || r2 >= hi {
                    continue;
                }
                for col in 0..wi {
                    let c2 = col + dv;
                    if c2 < 0 || c2 >= wi {
                        continue;
                    }
                    acc += ad[(r * wi + col) as usize] * bd[(r2 * wi + c2) as usize];
                }
            }
            worst = worst.max(acc.abs());
        }
    }
    worst
}

pub fn run(args: MinimizeArgs) -> CliResult<()> {
    if args.kernels < 2 {
        return Err(CliError::Usage(format!(
            "--kernels must be >= 2 to form a pair, got {}",
            args.kernels
        )));
    }
    if args.channels == 0 {
        return Err(CliError::Usage("--channels must be >= 1".into()));
    }
    let spatial = parse_spatial(&args.size)?;
    if spatial.support() == 0 {
        return Err(CliError::Usage("--size extents must be >= 1".into()));
    }
    let optimizer = match args.optimizer.as_str() {
        "adam" => OptimizerConfig::adam(args.lr),
        "sgd" => OptimizerConfig::sgd(args.lr),
        other => {
            return Err(CliError::Usage(format!(
                "--optimizer: expected adam or sgd, got `{other}`"
            )))
        }
    };
    if args.iters == 0 {
        return Err(CliError::Usage("--iters must be >= 1".into()));
    }

    let shape = match spatial {
        Spatial::OneD(n) => vec![args.kernels, args.channels, n],
        Spatial::TwoD(h, w) => vec![args.kernels, args.channels, h, w],
    };
    let init = sample_uniform(RngStream::new(args.seed, 0), -1.0, 1.0, shape)
        .map_err(|e| CliError::Failed(e.to_string()))?;

    let (s, c) = (args.kernels, args.channels);
    let objective = |p: &Tensor| {
        let bank = KernelBank::new(s, c, spatial, p.clone()).expect("described bank");
        let lv = conv_sim_value_and_grad(&bank).expect("bank with S >= 2");
        (lv.value, lv.gradient.expect("gradient requested"))
    };
    let initial_loss = objective(&init).0;
    let (params, losses) = minimize(objective, init, optimizer, args.iters, |_, _, _| {})
        .map_err(|e| CliError::Failed(e.to_string()))?;
    let bank = KernelBank::new(s, c, spatial, params).expect("described bank");
    let final_loss = conv_sim_bank(&bank)
        .map_err(|e| CliError::Failed(e.to_string()))?
        .value;

    let mut pairs = Vec::new();
    for i in 0..s {
        for j in (i + 1)..s {
            let mut residual = 0.0;
            let mut max_lag_value = 0.0f64;
            for c1 in 0..c {
                for c2 in 0..c {
                    let a = channel_tensor(&bank, i, c1);
                    let b = channel_tensor(&bank, j, c2);
                    residual += conv_sim_pair(&a, &b).expect("matching shapes");
                    max_lag_value = max_lag_value.max(max_abs_lag(&a, &b, spatial));
                }
            }
            pairs.push(PairResidual {
                i,
                j,
                residual,
                max_lag_value,
            });
        }
    }

    println!(
        "loss: {initial_loss:.6e} -> {final_loss:.6e} after {} iterations ({} {})",
        args.iters, args.optimizer, args.lr
    );
    for p in &pairs {
        println!(
            "  pair ({}, {}): residual {:.3e}, max |lag| {:.3e}",
            p.i, p.j, p.residual, p.max_lag_value
        );
    }

    let report = MinimizeReport {
        kernels: s,
        channels: c,
        spatial: match spatial {
            Spatial::OneD(n) => vec![n],
            Spatial::TwoD(h, w) => vec![h, w],
        },
        optimizer: args.optimizer.clone(),
        lr: args.lr,
        iters: args.iters,
        seed: args.seed,
        initial_loss,
        final_loss,
        pairs,
    };
    let mut writer = ArtifactWriter::new(&args.out_dir, "minimize", args.seed)?;
    writer.write(
        "report.json",
        &serde_json::to_vec_pretty(&report).expect("serializable report"),
    )?;
    writer.finish(serde_json::json!({
        "kernels": s,
        "channels": c,
        "size": args.size,
        "optimizer": args.optimizer,
        "lr": args.lr,
        "iters": args.iters,
        "seed": args.seed,
    }))?;

    let _ = losses;
    Ok(())
}
