//! Cross-correlation and convolution over zero-extended real signals, plus
//! the exact inner-product identities that relate feature-map similarity to
//! kernel cross-correlation.
//!
//! Index conventions. A kernel `K` of length `N` slid over a signal `X` of
//! length `M` with padding `P` produces outputs at absolute positions
//! `i in [N-1-P, M-1+P]`:
//!
//! ```text
//! (X (x) K)[i] = sum_n K[n] * X[i + n - N + 1]     cross-correlation
//! (X  *  K)[i] = sum_n K[n] * X[i - n]             convolution
//! ```
//!
//! with out-of-range reads of `X` equal to zero. Correlation *series* between
//! two equal-length vectors are indexed by lag instead:
//! `corr(A, B)[n] = sum_i A[i] * B[i + n]` for `n in [1-N, N-1]`.
//!
//! All sums are evaluated directly in `f64`; at the signal sizes this crate
//! targets, direct summation keeps the identity residuals at machine-epsilon
//! scale with no transform machinery involved.

use crate::numerics::Tensor;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("padding {p} out of range for kernel length {n} (need 0 <= P <= N-1)")]
    PaddingOutOfRange { p: usize, n: usize },
    #[error("same padding requires an odd kernel length, got {0}")]
    SameNeedsOddKernel(usize),
    #[error("kernel lengths differ: {0} vs {1}")]
    KernelLengthMismatch(usize, usize),
    #[error("empty input: signal and kernel must each have at least one element")]
    EmptyInput,
    #[error("output would be empty: M={m}, N={n}, P={p}")]
    EmptyOutput { m: usize, n: usize, p: usize },
    #[error("expected a 2-d tensor, got shape {0:?}")]
    NotTwoDim(Vec<usize>),
}

pub type Result<T> = std::result::Result<T, SignalError>;

/// Zero-extension padding applied to both sides of the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaddingSpec {
    /// `P = N - 1`; output length `M + N - 1`.
    Full,
    /// `P = 0`; output length `M - N + 1`.
    Valid,
    /// `P = (N - 1) / 2` (odd `N` only); output length `M`.
    Same,
    /// Arbitrary `P in [0, N-1]`.
    Explicit(usize),
}

impl PaddingSpec {
    /// Concrete padding width for a kernel of length `n`.
    pub fn resolve(self, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(SignalError::EmptyInput);
        }
        match self {
            PaddingSpec::Full => Ok(n - 1),
            PaddingSpec::Valid => Ok(0),
            PaddingSpec::Same => {
                if n % 2 == 0 {
                    Err(SignalError::SameNeedsOddKernel(n))
                } else {
                    Ok((n - 1) / 2)
                }
            }
            PaddingSpec::Explicit(p) => {
                if p > n - 1 {
                    Err(SignalError::PaddingOutOfRange { p, n })
                } else {
                    Ok(p)
                }
            }
        }
    }
}

/// Output of a sliding correlation/convolution, tagged with the absolute
/// index of its first element so results under different paddings stay
/// aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    values: Vec<f64>,
    first_index: i64,
}

impl FeatureMap {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Absolute index of `values[0]`, i.e. `N - 1 - P`.
    pub fn first_index(&self) -> i64 {
        self.first_index
    }

    /// Value at absolute output index `i`; zero outside the computed range.
    pub fn at(&self, i: i64) -> f64 {
        let k = i - self.first_index;
        if k < 0 || k as usize >= self.values.len() {
            0.0
        } else {
            self.values[k as usize]
        }
    }
}

/// Correlation values indexed by integer lag. Used both for the clipped
/// auto-correlation of an input and for kernel-kernel cross-correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct LagSeries {
    values: Vec<f64>,
    min_lag: i64,
}

impl LagSeries {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min_lag(&self) -> i64 {
        self.min_lag
    }

    pub fn max_lag(&self) -> i64 {
        self.min_lag + self.values.len() as i64 - 1
    }

    /// Value at lag `n`; zero outside the stored range.
    pub fn at_lag(&self, n: i64) -> f64 {
        let k = n - self.min_lag;
        if k < 0 || k as usize >= self.values.len() {
            0.0
        } else {
            self.values[k as usize]
        }
    }

    pub fn lags(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &v)| (self.min_lag + k as i64, v))
    }
}

fn at(x: &[f64], i: i64) -> f64 {
    if i < 0 || i as usize >= x.len() {
        0.0
    } else {
        x[i as usize]
    }
}

fn check_inputs(x: &[f64], k: &[f64]) -> Result<()> {
    if x.is_empty() || k.is_empty() {
        return Err(SignalError::EmptyInput);
    }
    Ok(())
}

/// Sliding inner product of `k` against `x` without kernel reversal.
pub fn cross_correlate(x: &[f64], k: &[f64], pad: PaddingSpec) -> Result<FeatureMap> {
    check_inputs(x, k)?;
    let n = k.len() as i64;
    let m = x.len() as i64;
    let p = pad.resolve(k.len())? as i64;
    let first = n - 1 - p;
    let last = m - 1 + p;
    if last < first {
        return Err(SignalError::EmptyOutput {
            m: x.len(),
            n: k.len(),
            p: p as usize,
        });
    }
    let mut values = Vec::with_capacity((last - first + 1) as usize);
    for i in first..=last {
        let mut acc = 0.0;
        for (kn, &kv) in k.iter().enumerate() {
            acc += kv * at(x, i + kn as i64 - n + 1);
        }
        values.push(acc);
    }
    Ok(FeatureMap {
        values,
        first_index: first,
    })
}

/// Sliding inner product with kernel reversal, over the same output range as
/// [`cross_correlate`].
pub fn convolve(x: &[f64], k: &[f64], pad: PaddingSpec) -> Result<FeatureMap> {
    check_inputs(x, k)?;
    let n = k.len() as i64;
    let m = x.len() as i64;
    let p = pad.resolve(k.len())? as i64;
    let first = n - 1 - p;
    let last = m - 1 + p;
    if last < first {
        return Err(SignalError::EmptyOutput {
            m: x.len(),
            n: k.len(),
            p: p as usize,
        });
    }
    let mut values = Vec::with_capacity((last - first + 1) as usize);
    for i in first..=last {
        let mut acc = 0.0;
        for (kn, &kv) in k.iter().enumerate() {
            acc += kv * at(x, i - kn as i64);
        }
        values.push(acc);
    }
    Ok(FeatureMap {
        values,
        first_index: first,
    })
}

/// Auto-correlation of `x` clipped to lags `[1-N, N-1]`:
/// `value(n) = sum_i x[i+n] * x[i]` with `x` zero-extended.
pub fn auto_correlate_clipped(x: &[f64], n: usize) -> Result<LagSeries> {
    if x.is_empty() || n == 0 {
        return Err(SignalError::EmptyInput);
    }
    correlation_lags(x, x, n)
}

/// Cross-correlation of two equal-length kernels by lag over `[1-N, N-1]`:
/// `value(n) = sum_i k1[i] * k2[i+n]`.
pub fn kernel_correlation(k1: &[f64], k2: &[f64]) -> Result<LagSeries> {
    if k1.is_empty() {
        return Err(SignalError::EmptyInput);
    }
    if k1.len() != k2.len() {
        return Err(SignalError::KernelLengthMismatch(k1.len(), k2.len()));
    }
    correlation_lags(k1, k2, k1.len())
}

fn correlation_lags(a: &[f64], b: &[f64], n: usize) -> Result<LagSeries> {
    let min_lag = 1 - n as i64;
    let mut values = Vec::with_capacity(2 * n - 1);
    for lag in min_lag..=(n as i64 - 1) {
        let mut acc = 0.0;
        for (i, &av) in a.iter().enumerate() {
            acc += av * at(b, i as i64 + lag);
        }
        values.push(acc);
    }
    Ok(LagSeries { values, min_lag })
}

/// Brute-force `<F1, F2>`: materializes both feature maps under `pad` and
/// sums their elementwise product.
pub fn feature_inner_product(
    x: &[f64],
    k1: &[f64],
    k2: &[f64],
    pad: PaddingSpec,
) -> Result<f64> {
    if k1.len() != k2.len() {
        return Err(SignalError::KernelLengthMismatch(k1.len(), k2.len()));
    }
    let f1 = cross_correlate(x, k1, pad)?;
    let f2 = cross_correlate(x, k2, pad)?;
    debug_assert_eq!(f1.first_index, f2.first_index);
    Ok(crate::numerics::dot(f1.values(), f2.values()))
}

/// As [`feature_inner_product`] but with the maps produced by [`convolve`].
pub fn feature_inner_product_convolution(
    x: &[f64],
    k1: &[f64],
    k2: &[f64],
    pad: PaddingSpec,
) -> Result<f64> {
    if k1.len() != k2.len() {
        return Err(SignalError::KernelLengthMismatch(k1.len(), k2.len()));
    }
    let f1 = convolve(x, k1, pad)?;
    let f2 = convolve(x, k2, pad)?;
    Ok(crate::numerics::dot(f1.values(), f2.values()))
}

/// The closed form of `<F1, F2>` under full padding: the inner product of the
/// kernel cross-correlation with the clipped auto-correlation of the input.
pub fn identity_rhs(x: &[f64], k1: &[f64], k2: &[f64]) -> Result<f64> {
    if k1.len() != k2.len() {
        return Err(SignalError::KernelLengthMismatch(k1.len(), k2.len()));
    }
    check_inputs(x, k1)?;
    let kc = kernel_correlation(k1, k2)?;
    let ac = auto_correlate_clipped(x, k1.len())?;
    Ok(crate::numerics::dot(kc.values(), ac.values()))
}

/// Exact split of `<F1, F2>` under padding `P` into the full-padding term
/// minus two boundary corrections.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedDecomposition {
    /// Brute-force `<F1, F2>` under the requested padding.
    pub lhs: f64,
    /// `<(K1 (x) K2), (X (x) X)_[1-N, N-1]>` - the full-padding value.
    pub full_term: f64,
    /// Left-boundary correction; zero when `P = N - 1`.
    pub a: f64,
    /// Right-boundary correction; zero when `P = N - 1`.
    pub b: f64,
}

impl PaddedDecomposition {
    /// `full_term - a - b`, which equals `lhs` up to float rounding.
    pub fn reconstructed(&self) -> f64 {
        self.full_term - self.a - self.b
    }
}

/// Computes the padded decomposition `lhs = full_term - A - B`.
///
/// `A` and `B` are the boundary sums over the output positions that full
/// padding includes but padding `P` does not:
///
/// ```text
/// A = sum_{n1} sum_{n2} K1[n1] K2[n2] sum_{i=n1+1-N}^{n1-P-1}     X[i+n2-n1] X[i]
/// B = sum_{n1} sum_{n2} K1[n1] K2[n2] sum_{i=M-N+P+n1+1}^{M-1+n1} X[i+n2-n1] X[i]
/// ```
pub fn padded_decomposition(
    x: &[f64],
    k1: &[f64],
    k2: &[f64],
    pad: PaddingSpec,
) -> Result<PaddedDecomposition> {
    if k1.len() != k2.len() {
        return Err(SignalError::KernelLengthMismatch(k1.len(), k2.len()));
    }
    check_inputs(x, k1)?;
    let n = k1.len() as i64;
    let m = x.len() as i64;
    let p = pad.resolve(k1.len())? as i64;

    let lhs = feature_inner_product(x, k1, k2, pad)?;
    let full_term = identity_rhs(x, k1, k2)?;

    let mut a = 0.0;
    let mut b = 0.0;
    for (n1, &kv1) in k1.iter().enumerate() {
        let n1 = n1 as i64;
        for (n2, &kv2) in k2.iter().enumerate() {
            let n2 = n2 as i64;
            let w = kv1 * kv2;
            if w == 0.0 {
                continue;
            }
            let mut sa = 0.0;
            for i in (n1 + 1 - n)..=(n1 - p - 1) {
                sa += at(x, i + n2 - n1) * at(x, i);
            }
            a += w * sa;
            let mut sb = 0.0;
            for i in (m - n + p + n1 + 1)..=(m - 1 + n1) {
                sb += at(x, i + n2 - n1) * at(x, i);
            }
            b += w * sb;
        }
    }

    Ok(PaddedDecomposition {
        lhs,
        full_term,
        a,
        b,
    })
}

/// The nonzero-lag part of the identity:
/// `sum_{n != 0} (X (x) X)[n] * (K1 (x) K2)[n]`.
///
/// When `<K1, K2> = 0` this equals `<F1, F2>` under full padding - the term
/// kernel orthogonality leaves behind.
pub fn orthogonality_gap(x: &[f64], k1: &[f64], k2: &[f64]) -> Result<f64> {
    if k1.len() != k2.len() {
        return Err(SignalError::KernelLengthMismatch(k1.len(), k2.len()));
    }
    check_inputs(x, k1)?;
    let kc = kernel_correlation(k1, k2)?;
    let ac = auto_correlate_clipped(x, k1.len())?;
    Ok(kc
        .lags()
        .filter(|&(lag, _)| lag != 0)
        .map(|(lag, kv)| kv * ac.at_lag(lag))
        .sum())
}

/// Two-dimensional feature map with per-axis absolute start indices.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap2 {
    values: Tensor,
    first_index: (i64, i64),
}

impl FeatureMap2 {
    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn first_index(&self) -> (i64, i64) {
        self.first_index
    }
}

/// 2-d cross-correlation: the 1-d index rule applied along both axes with
/// independent paddings.
pub fn cross_correlate_2d(
    x: &Tensor,
    k: &Tensor,
    pad: (PaddingSpec, PaddingSpec),
) -> Result<FeatureMap2> {
    let (xh, xw) = dims_2d(x)?;
    let (kh, kw) = dims_2d(k)?;
    let ph = pad.0.resolve(kh)? as i64;
    let pw = pad.1.resolve(kw)? as i64;
    let (xh, xw, kh, kw) = (xh as i64, xw as i64, kh as i64, kw as i64);
    let first = (kh - 1 - ph, kw - 1 - pw);
    let oh = xh + 2 * ph - kh + 1;
    let ow = xw + 2 * pw - kw + 1;
    if oh < 1 || ow < 1 {
        return Err(SignalError::EmptyOutput {
            m: (xh * xw) as usize,
            n: (kh * kw) as usize,
            p: ph.min(pw) as usize,
        });
    }
    let xd = x.data();
    let kd = k.data();
    let mut out = Tensor::zeros(vec![oh as usize, ow as usize]).expect("positive dims");
    {
        let od = out.data_mut();
        for oi in 0..oh {
            for oj in 0..ow {
                let i = first.0 + oi;
                let j = first.1 + oj;
                let mut acc = 0.0;
                for a in 0..kh {
                    let xi = i + a - kh + 1;
                    if xi < 0 || xi >= xh {
                        continue;
                    }
                    for b in 0..kw {
                        let xj = j + b - kw + 1;
                        if xj < 0 || xj >= xw {
                            continue;
                        }
                        acc += kd[(a * kw + b) as usize] * xd[(xi * xw + xj) as usize];
                    }
                }
                od[(oi * ow + oj) as usize] = acc;
            }
        }
    }
    Ok(FeatureMap2 {
        values: out,
        first_index: first,
    })
}

fn dims_2d(t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [h, w] => Ok((*h, *w)),
        other => Err(SignalError::NotTwoDim(other.to_vec())),
    }
}
