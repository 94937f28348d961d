//! Randomized verification of the library's core guarantees: the
//! full-padding inner-product identity, the padded decomposition, analytic
//! gradients against finite differences, and the zero-loss certificate.

use crate::manifest::ArtifactWriter;
use crate::{CliError, CliResult};
use convsim_core::convsim::{
    conv_sim_bank, conv_sim_value_and_grad, kernel_similarity, kernel_similarity_grad,
    KernelBank, Spatial,
};
use convsim_core::numerics::{sample_uniform_from, RngStream, Tensor};
use convsim_core::optim::{Optimizer, OptimizerConfig};
use convsim_core::signal::{
    feature_inner_product, identity_rhs, padded_decomposition, PaddingSpec,
};
use rand::Rng;
use serde::Serialize;
use std::path::PathBuf;

pub struct VerifyArgs {
    pub trials: usize,
    pub min_m: usize,
    pub max_m: usize,
    pub max_n: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub break_rhs: bool,
}

#[derive(Debug, Serialize)]
struct CheckReport {
    name: String,
    max_residual: f64,
    tolerance: f64,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    worst_case: Option<serde_json::Value>,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    trials: usize,
    seed: u64,
    checks: Vec<CheckReport>,
}

fn rel(residual: f64, scale: f64) -> f64 {
    residual.abs() / f64::max(1.0, scale.abs())
}

pub fn run(args: VerifyArgs) -> CliResult<()> {
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be >= 1".into()));
    }
    if args.min_m == 0 || args.min_m > args.max_m || args.max_n == 0 {
        return Err(CliError::Usage(
            "need 1 <= min-m <= max-m and max-n >= 1".into(),
        ));
    }

    let mut rng = RngStream::new(args.seed, 0).rng();
    let mut checks = Vec::new();

    // Identity under full padding.
    {
        let mut max_residual = 0.0f64;
        let mut worst = None;
        for _ in 0..args.trials {
            let m = rng.gen_range(args.min_m..=args.max_m);
            let n = rng.gen_range(1..=args.max_n);
            let x = sample_uniform_from(&mut rng, 0.0, 1.0, vec![m]).unwrap();
            let k1 = sample_uniform_from(&mut rng, -1.0, 1.0, vec![n]).unwrap();
            let k2 = sample_uniform_from(&mut rng, -1.0, 1.0, vec![n]).unwrap();
            let lhs = feature_inner_product(x.data(), k1.data(), k2.data(), PaddingSpec::Full)
                .map_err(|e| CliError::Failed(e.to_string()))?;
            let mut rhs = identity_rhs(x.data(), k1.data(), k2.data())
                .map_err(|e| CliError::Failed(e.to_string()))?;
            if args.break_rhs {
                rhs += 1e-3 * (1.0 + rhs.abs());
            }
            let r = rel(lhs - rhs, lhs);
            if r > max_residual {
                max_residual = r;
                worst = Some(serde_json::json!({
                    "m": m, "n": n, "lhs": lhs, "rhs": rhs,
                    "x": x.data(), "k1": k1.data(), "k2": k2.data(),
                }));
            }
        }
        let pass = max_residual <= args.tolerance;
        checks.push(CheckReport {
            name: "identity_full_padding".into(),
            max_residual,
            tolerance: args.tolerance,
            pass,
            worst_case: if pass { None } else { worst },
        });
    }

    // Padded decomposition, every padding of each drawn kernel length.
    {
        let mut max_residual = 0.0f64;
        let mut worst = None;
        for _ in 0..args.trials {
            let n = rng.gen_range(1..=args.max_n);
            let m = rng.gen_range(args.min_m.max(n)..=args.max_m.max(n));
            let x = sample_uniform_from(&mut rng, 0.0, 1.0, vec![m]).unwrap();
            let k1 = sample_uniform_from(&mut rng, -1.0, 1.0, vec![n]).unwrap();
            let k2 = sample_uniform_from(&mut rng, -1.0, 1.0, vec![n]).unwrap();
            for p in 0..n {
                let d = padded_decomposition(x.data(), k1.data(), k2.data(), PaddingSpec::Explicit(p))
                    .map_err(|e| CliError::Failed(e.to_string()))?;
                let mut recon = d.reconstructed();
                if args.break_rhs {
                    recon += 1e-3 * (1.0 + recon.abs());
                }
                let r = rel(d.lhs - recon, d.lhs);
                if r > max_residual {
                    max_residual = r;
                    worst = Some(serde_json::json!({
                        "m": m, "n": n, "p": p,
                        "lhs": d.lhs, "full_term": d.full_term, "a": d.a, "b": d.b,
                    }));
                }
                if p == n - 1 && (d.a != 0.0 || d.b != 0.0) {
                    max_residual = f64::INFINITY;
                }
            }
        }
        let pass = max_residual <= args.tolerance;
        checks.push(CheckReport {
            name: "padded_decomposition".into(),
            max_residual,
            tolerance: args.tolerance,
            pass,
            worst_case: if pass { None } else { worst },
        });
    }

    // Analytic gradients against central differences.
    {
        let tol = 1e-6;
        let mut max_residual = 0.0f64;
        for (s, c, spatial) in [
            (2, 1, Spatial::OneD(3)),
            (2, 3, Spatial::OneD(9)),
            (4, 1, Spatial::OneD(16)),
            (2, 2, Spatial::TwoD(3, 3)),
        ] {
            let shape = match spatial {
                Spatial::OneD(n) => vec![s, c, n],
                Spatial::TwoD(h, w) => vec![s, c, h, w],
            };
            let weights = sample_uniform_from(&mut rng, -1.0, 1.0, shape).unwrap();
            let bank = KernelBank::new(s, c, spatial, weights.clone()).unwrap();
            let grad = conv_sim_value_and_grad(&bank)
                .map_err(|e| CliError::Failed(e.to_string()))?
                .gradient
                .expect("gradient requested");
            let h = 1e-6;
            for i in 0..weights.len() {
                let mut plus = weights.clone();
                plus.data_mut()[i] += h;
                let mut minus = weights.clone();
                minus.data_mut()[i] -= h;
                let fp = conv_sim_bank(&KernelBank::new(s, c, spatial, plus).unwrap())
                    .unwrap()
                    .value;
                let fm = conv_sim_bank(&KernelBank::new(s, c, spatial, minus).unwrap())
                    .unwrap()
                    .value;
                let fd = (fp - fm) / (2.0 * h);
                max_residual = max_residual.max(rel(fd - grad.data()[i], grad.data()[i]));
            }
        }
        // Kernel-similarity gradient on a random pair.
        let k1 = sample_uniform_from(&mut rng, -1.0, 1.0, vec![9]).unwrap();
        let k2 = sample_uniform_from(&mut rng, -1.0, 1.0, vec![9]).unwrap();
        let (g1, _) = kernel_similarity_grad(&k1, &k2).unwrap();
        let h = 1e-6;
        for i in 0..k1.len() {
            let mut plus = k1.clone();
            plus.data_mut()[i] += h;
            let mut minus = k1.clone();
            minus.data_mut()[i] -= h;
            let fd = (kernel_similarity(&plus, &k2).unwrap()
                - kernel_similarity(&minus, &k2).unwrap())
                / (2.0 * h);
            max_residual = max_residual.max(rel(fd - g1.data()[i], g1.data()[i]));
        }
        checks.push(CheckReport {
            name: "analytic_gradients".into(),
            max_residual,
            tolerance: tol,
            pass: max_residual <= tol,
            worst_case: None,
        });
    }

    // Zero-loss certificate: drive pairs to a negligible loss, then check
    // fresh inputs yield negligible squared feature-map inner products.
    {
        let tol = 1e-9;
        let mut max_residual = 0.0f64;
        let mut worst = None;
        for n in [3usize, 9] {
            let init = sample_uniform_from(&mut rng, -1.0, 1.0, vec![2, 1, n]).unwrap();
            let driven = drive_to_zero_loss(init.clone(), n)
                .map_err(|e| CliError::Failed(format!("zero-loss driver: {e}")))?;
            let (k1_0, k2_0) = init.data().split_at(n);
            let (k1, k2) = driven.data().split_at(n);
            for _ in 0..100 {
                let x = sample_uniform_from(&mut rng, 0.0, 1.0, vec![64]).unwrap();
                let initial_ip =
                    feature_inner_product(x.data(), k1_0, k2_0, PaddingSpec::Full).unwrap();
                let final_ip = feature_inner_product(x.data(), k1, k2, PaddingSpec::Full).unwrap();
                let scale = f64::max(1.0, initial_ip * initial_ip);
                let r = (final_ip * final_ip) / scale;
                if r > max_residual {
                    max_residual = r;
                    worst = Some(serde_json::json!({
                        "n": n, "final_ip": final_ip, "initial_ip": initial_ip,
                    }));
                }
            }
        }
        let pass = max_residual <= tol;
        checks.push(CheckReport {
            name: "zero_loss_certificate".into(),
            max_residual,
            tolerance: tol,
            pass,
            worst_case: if pass { None } else { worst },
        });
    }

    let all_pass = checks.iter().all(|c| c.pass);
    for c in &checks {
        println!(
            "{:24} max residual {:10.3e}  (tolerance {:.0e})  {}",
            c.name,
            c.max_residual,
            c.tolerance,
            if c.pass { "ok" } else { "FAIL" }
        );
    }

    let report = VerifyReport {
        trials: args.trials,
        seed: args.seed,
        checks,
    };
    let mut writer = ArtifactWriter::new(&args.out_dir, "verify", args.seed)?;
    writer.write(
        "verify.json",
        &serde_json::to_vec_pretty(&report).expect("serializable report"),
    )?;
    writer.finish(serde_json::json!({
        "trials": args.trials,
        "min_m": args.min_m,
        "max_m": args.max_m,
        "max_n": args.max_n,
        "tolerance": args.tolerance,
        "seed": args.seed,
    }))?;

    if all_pass {
        Ok(())
    } else {
        Err(CliError::Failed(
            "verification failed; see verify.json for the failing case".into(),
        ))
    }
}

/// Minimizes a two-kernel bank until the loss drops to the certificate
/// regime (well under 1e-12) or an iteration cap.
fn drive_to_zero_loss(
    init: Tensor,
    n: usize,
) -> Result<Tensor, convsim_core::optim::OptimError> {
    let mut params = init;
    let mut opt = Optimizer::new(OptimizerConfig::adam(0.1))?;
    for _ in 0..20_000 {
        let bank = KernelBank::new(2, 1, Spatial::OneD(n), params.clone()).expect("pair bank");
        let lv = conv_sim_value_and_grad(&bank).expect("pair bank");
        if lv.value <= 1e-26 {
            break;
        }
        opt.step(&mut params, &lv.gradient.expect("gradient requested"))?;
    }
    Ok(params)
}
