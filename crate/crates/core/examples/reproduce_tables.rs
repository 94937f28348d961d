//! Runs every bundled Monte-Carlo configuration and prints one summary row
//! per cell. Optionally takes an alternative base seed.
//!
//! ```text
//! cargo run --release -p convsim-core --example reproduce_tables [SEED]
//! ```

use convsim_core::experiments::{preset, preset_names, run_experiment, DEFAULT_BASE_SEED};
use std::time::Instant;

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_BASE_SEED);
    println!("base seed {seed}, 1000 episodes per cell");
    for name in preset_names() {
        let mut cfg = preset(name).expect("bundled preset");
        cfg.base_seed = seed;
        let t0 = Instant::now();
        let r = run_experiment(&cfg).expect("experiment runs");
        let s = &r.summary;
        println!(
            "{name:18} corr {:+.3} ± {:.3} | reduction {:5.1}% | decrease {:6.2} ± {:5.2} | \
             increase {:9.3e} ± {:9.3e} | dropped {} | {:.1}s",
            s.corr_mean,
            s.corr_std,
            s.reduction_frequency,
            s.decrease_mean,
            s.decrease_std,
            s.increase_mean,
            s.increase_std,
            s.dropped_episodes,
            t0.elapsed().as_secs_f64()
        );
    }
}
