//! Shared finite-difference helpers for the gradient and acceptance suites.

use convsim_core::numerics::Tensor;

/// Largest relative mismatch between an analytic gradient and central
/// differences of `f`, probing every coordinate of `x`.
pub fn max_fd_mismatch<F>(mut f: F, x: &Tensor, analytic: &[f64], h: f64) -> f64
where
    F: FnMut(&Tensor) -> f64,
{
    assert_eq!(x.len(), analytic.len());
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += h;
        let mut minus = x.clone();
        minus.data_mut()[i] -= h;
        let fd = (f(&plus) - f(&minus)) / (2.0 * h);
        let rel = (fd - analytic[i]).abs() / f64::max(1.0, analytic[i].abs());
        worst = worst.max(rel);
    }
    worst
}

/// Deterministic pseudo-random projection weights used to turn a tensor
/// output into a scalar objective.
pub fn projection(len: usize, seed: u64) -> Vec<f64> {
    use convsim_core::numerics::{sample_uniform, RngStream};
    sample_uniform(RngStream::new(seed, 17), -1.0, 1.0, vec![len])
        .unwrap()
        .into_data()
}

pub fn weigh(out: &Tensor, proj: &[f64]) -> f64 {
    out.data().iter().zip(proj).map(|(a, b)| a * b).sum()
}
