//! The convolutional-similarity loss: the sum of squared full
//! cross-correlation values between every pair of kernels in a bank, across
//! all channel pairs and all lags. Driving it to zero certifies that the
//! kernels produce orthogonal feature maps under full padding for *every*
//! input.
//!
//! Two evaluation routes are provided. [`conv_sim_pair`] and the ordered
//! enumeration sum the squared correlations directly from their definition.
//! [`conv_sim_bank`] evaluates the same sum through the kernel Gram matrix
//! `P = A^T A` (`A` = kernels flattened to rows), using
//! `sum_pq corr(p,q)[n]^2 = tr(P . shift_n(P))`: quadratic cost in the
//! kernel *support* instead of the bank size, which is what makes per-step
//! minimization on a full convolutional layer affordable. The tests hold the
//! two routes against each other and against finite differences.

use crate::numerics::Tensor;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConvSimError {
    #[error("kernel shapes differ: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("kernel tensors must be 1-d or 2-d, got shape {0:?}")]
    BadKernelRank(Vec<usize>),
    #[error("bank needs at least 2 kernels to form a pair, got S={0}")]
    DegenerateBank(usize),
    #[error("bank weights must be finite")]
    NonFiniteWeights,
    #[error("weights shape {got:?} does not match bank layout {expected:?}")]
    BankShape { expected: Vec<usize>, got: Vec<usize> },
}

pub type Result<T> = std::result::Result<T, ConvSimError>;

/// Spatial support of one kernel channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Spatial {
    OneD(usize),
    TwoD(usize, usize),
}

impl Spatial {
    /// Height/width view; 1-d kernels are a single row.
    pub fn hw(self) -> (usize, usize) {
        match self {
            Spatial::OneD(n) => (1, n),
            Spatial::TwoD(h, w) => (h, w),
        }
    }

    pub fn support(self) -> usize {
        let (h, w) = self.hw();
        h * w
    }
}

/// The kernels of one convolutional layer: `S` output kernels, each with `C`
/// channels of the given spatial support.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBank {
    s: usize,
    c: usize,
    spatial: Spatial,
    weights: Tensor,
}

impl KernelBank {
    pub fn new(s: usize, c: usize, spatial: Spatial, weights: Tensor) -> Result<Self> {
        let expected: Vec<usize> = match spatial {
            Spatial::OneD(n) => vec![s, c, n],
            Spatial::TwoD(h, w) => vec![s, c, h, w],
        };
        if s == 0 || c == 0 || spatial.support() == 0 {
            return Err(ConvSimError::BankShape {
                expected,
                got: weights.shape().to_vec(),
            });
        }
        if weights.shape() != expected.as_slice() {
            return Err(ConvSimError::BankShape {
                expected,
                got: weights.shape().to_vec(),
            });
        }
        if !weights.all_finite() {
            return Err(ConvSimError::NonFiniteWeights);
        }
        Ok(Self {
            s,
            c,
            spatial,
            weights,
        })
    }

    /// Bank of two single-channel 1-d kernels, the shape used by the
    /// Monte-Carlo experiments.
    pub fn from_pair(k1: &[f64], k2: &[f64]) -> Result<Self> {
        if k1.len() != k2.len() {
            return Err(ConvSimError::ShapeMismatch {
                left: vec![k1.len()],
                right: vec![k2.len()],
            });
        }
        let mut data = Vec::with_capacity(2 * k1.len());
        data.extend_from_slice(k1);
        data.extend_from_slice(k2);
        let weights = Tensor::new(vec![2, 1, k1.len()], data).expect("consistent shape");
        Self::new(2, 1, Spatial::OneD(k1.len()), weights)
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn spatial(&self) -> Spatial {
        self.spatial
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Tensor {
        &mut self.weights
    }

    pub fn into_weights(self) -> Tensor {
        self.weights
    }

    /// Flat slice of channel `ch` of kernel `i`.
    pub fn channel(&self, i: usize, ch: usize) -> &[f64] {
        let k = self.spatial.support();
        let start = (i * self.c + ch) * k;
        &self.weights.data()[start..start + k]
    }
}

/// A loss evaluation; `gradient` is populated by the `_and_grad` routes and
/// always has the bank's weight shape.
#[derive(Debug, Clone)]
pub struct LossValue {
    pub value: f64,
    pub gradient: Option<Tensor>,
}

/// Which pair enumeration the bank loss sums over. The paper-facing loss is
/// the unordered `i < j` form; the ordered `i != j` form is retained for the
/// factor-two equivalence check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairEnumeration {
    Unordered,
    Ordered,
}

fn kernel_hw(shape: &[usize]) -> Result<(usize, usize)> {
    match shape {
        [n] => Ok((1, *n)),
        [h, w] => Ok((*h, *w)),
        other => Err(ConvSimError::BadKernelRank(other.to_vec())),
    }
}

/// Sum over all lags of the squared full cross-correlation of two kernels,
/// straight from the definition.
pub fn conv_sim_pair(k1: &Tensor, k2: &Tensor) -> Result<f64> {
    if k1.shape() != k2.shape() {
        return Err(ConvSimError::ShapeMismatch {
            left: k1.shape().to_vec(),
            right: k2.shape().to_vec(),
        });
    }
    let (h, w) = kernel_hw(k1.shape())?;
    Ok(pair_loss_direct(k1.data(), k2.data(), h, w))
}

fn pair_loss_direct(k1: &[f64], k2: &[f64], h: usize, w: usize) -> f64 {
    let (h, w) = (h as i64, w as i64);
    let mut total = 0.0;
    for du in (1 - h)..h {
        for dv in (1 - w)..w {
            let mut r = 0.0;
            for i in 0..h {
                let j2r = i + du;
                if j2r < 0 || j2r >= h {
                    continue;
                }
                for j in 0..w {
                    let j2c = j + dv;
                    if j2c < 0 || j2c >= w {
                        continue;
                    }
                    r += k1[(i * w + j) as usize] * k2[(j2r * w + j2c) as usize];
                }
            }
            total += r * r;
        }
    }
    total
}

/// Loss over a bank with the default unordered (`i < j`) enumeration.
pub fn conv_sim_bank(bank: &KernelBank) -> Result<LossValue> {
    conv_sim_bank_with(bank, PairEnumeration::Unordered)
}

/// Loss over a bank with an explicit pair enumeration.
///
/// The unordered form runs through the Gram-matrix route; the ordered form
/// sums pair terms directly and exists as its independent double.
pub fn conv_sim_bank_with(bank: &KernelBank, pairs: PairEnumeration) -> Result<LossValue> {
    if bank.s < 2 {
        return Err(ConvSimError::DegenerateBank(bank.s));
    }
    match pairs {
        PairEnumeration::Unordered => {
            let value = gram_loss(bank);
            Ok(LossValue {
                value,
                gradient: None,
            })
        }
        PairEnumeration::Ordered => {
            let (h, w) = bank.spatial.hw();
            let mut total = 0.0;
            for i in 0..bank.s {
                for j in 0..bank.s {
                    if i == j {
                        continue;
                    }
                    for c1 in 0..bank.c {
                        for c2 in 0..bank.c {
                            total +=
                                pair_loss_direct(bank.channel(i, c1), bank.channel(j, c2), h, w);
                        }
                    }
                }
            }
            Ok(LossValue {
                value: total,
                gradient: None,
            })
        }
    }
}

/// Gradient of the unordered bank loss with respect to the weights.
pub fn conv_sim_grad(bank: &KernelBank) -> Result<Tensor> {
    Ok(conv_sim_value_and_grad(bank)?
        .gradient
        .expect("gradient requested"))
}

/// Unordered bank loss together with its analytic gradient.
pub fn conv_sim_value_and_grad(bank: &KernelBank) -> Result<LossValue> {
    if bank.s < 2 {
        return Err(ConvSimError::DegenerateBank(bank.s));
    }
    let (value, gradient) = gram_loss_and_grad(bank);
    Ok(LossValue {
        value,
        gradient: Some(gradient),
    })
}

// --- Gram-matrix route ---------------------------------------------------
//
// Flatten the bank to A: (S*C) rows of length K = kh*kw. For a lag g,
//   sum_{p,q} corr(row_p, row_q)[g]^2 = tr(P Q_g),  P = A^T A,
// where Q_g[k,l] = P[k+g, l+g] restricted to in-grid indices. Summing over
// all lags gives  L_all = sum_{k,l} P[k,l] * W[k,l]  with
// W[k,l] = sum_g P[k+g, l+g]. Rows belonging to the same kernel must not
// pair up, so the same construction restricted to each kernel's C rows is
// subtracted, and the ordered total is halved into the `i < j` form:
//   L = (L_all - sum_i L_ii) / 2,
//   dL/dA_i = 2 A_i (W - W_i).

struct GramContext {
    kh: i64,
    kw: i64,
    k: usize,
}

impl GramContext {
    fn new(spatial: Spatial) -> Self {
        let (kh, kw) = spatial.hw();
        Self {
            kh: kh as i64,
            kw: kw as i64,
            k: kh * kw,
        }
    }

    /// P = A^T A over `rows` slices of length `k`.
    fn gram(&self, rows: &[&[f64]]) -> Vec<f64> {
        let k = self.k;
        let mut p = vec![0.0; k * k];
        for row in rows {
            for a in 0..k {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                for l in 0..k {
                    p[a * k + l] += ra * row[l];
                }
            }
        }
        p
    }

    /// W[k,l] = sum over all lags g of P[k+g, l+g], both indices in-grid.
    fn lag_sum(&self, p: &[f64]) -> Vec<f64> {
        let (kh, kw) = (self.kh, self.kw);
        let k = self.k;
        let mut w = vec![0.0; k * k];
        for du in (1 - kh)..kh {
            for dv in (1 - kw)..kw {
                for au in 0..kh {
                    let su = au + du;
                    if su < 0 || su >= kh {
                        continue;
                    }
                    for av in 0..kw {
                        let sv = av + dv;
                        if sv < 0 || sv >= kw {
                            continue;
                        }
                        let a = (au * kw + av) as usize;
                        let sa = (su * kw + sv) as usize;
                        for lu in 0..kh {
                            let tu = lu + du;
                            if tu < 0 || tu >= kh {
                                continue;
                            }
                            for lv in 0..kw {
                                let tv = lv + dv;
                                if tv < 0 || tv >= kw {
                                    continue;
                                }
                                let l = (lu * kw + lv) as usize;
                                let sl = (tu * kw + tv) as usize;
                                w[a * k + l] += p[sa * k + sl];
                            }
                        }
                    }
                }
            }
        }
        w
    }

    fn contract(&self, p: &[f64], w: &[f64]) -> f64 {
        p.iter().zip(w).map(|(a, b)| a * b).sum()
    }
}

fn bank_rows(bank: &KernelBank) -> Vec<&[f64]> {
    (0..bank.s)
        .flat_map(|i| (0..bank.c).map(move |ch| bank.channel(i, ch)))
        .collect()
}

fn gram_loss(bank: &KernelBank) -> f64 {
    let ctx = GramContext::new(bank.spatial);
    let rows = bank_rows(bank);
    let p = ctx.gram(&rows);
    let w = ctx.lag_sum(&p);
    let l_all = ctx.contract(&p, &w);
    let mut l_diag = 0.0;
    for i in 0..bank.s {
        let kernel_rows = &rows[i * bank.c..(i + 1) * bank.c];
        let pi = ctx.gram(kernel_rows);
        let wi = ctx.lag_sum(&pi);
        l_diag += ctx.contract(&pi, &wi);
    }
    // The exact sum is a sum of squares; cancellation in the rearranged
    // difference can leave an epsilon-scale negative, which is truncated.
    f64::max((l_all - l_diag) / 2.0, 0.0)
}

fn gram_loss_and_grad(bank: &KernelBank) -> (f64, Tensor) {
    let ctx = GramContext::new(bank.spatial);
    let k = ctx.k;
    let rows = bank_rows(bank);
    let p = ctx.gram(&rows);
    let w = ctx.lag_sum(&p);
    let l_all = ctx.contract(&p, &w);

    let mut grad = vec![0.0; rows.len() * k];
    let mut l_diag = 0.0;
    for i in 0..bank.s {
        let kernel_rows = &rows[i * bank.c..(i + 1) * bank.c];
        let pi = ctx.gram(kernel_rows);
        let wi = ctx.lag_sum(&pi);
        l_diag += ctx.contract(&pi, &wi);

        // dL/dA_i = 2 A_i (W - W_i); W and W_i are symmetric.
        for (ch, row) in kernel_rows.iter().enumerate() {
            let out = &mut grad[(i * bank.c + ch) * k..(i * bank.c + ch + 1) * k];
            for a in 0..k {
                let mut acc = 0.0;
                for (l, &rl) in row.iter().enumerate() {
                    acc += rl * (w[a * k + l] - wi[a * k + l]);
                }
                out[a] = 2.0 * acc;
            }
        }
    }
    let value = f64::max((l_all - l_diag) / 2.0, 0.0);
    let gradient = Tensor::new(bank.weights.shape().to_vec(), grad).expect("bank shape");
    (value, gradient)
}

/// Squared inner product of two equally shaped kernels.
pub fn kernel_similarity(k1: &Tensor, k2: &Tensor) -> Result<f64> {
    if k1.shape() != k2.shape() {
        return Err(ConvSimError::ShapeMismatch {
            left: k1.shape().to_vec(),
            right: k2.shape().to_vec(),
        });
    }
    let ip = crate::numerics::dot(k1.data(), k2.data());
    Ok(ip * ip)
}

/// Gradient of [`kernel_similarity`] with respect to both kernels:
/// `d/dK1 = 2 <K1,K2> K2` and symmetrically for `K2`.
pub fn kernel_similarity_grad(k1: &Tensor, k2: &Tensor) -> Result<(Tensor, Tensor)> {
    if k1.shape() != k2.shape() {
        return Err(ConvSimError::ShapeMismatch {
            left: k1.shape().to_vec(),
            right: k2.shape().to_vec(),
        });
    }
    let ip = crate::numerics::dot(k1.data(), k2.data());
    let g1 = k2.data().iter().map(|&v| 2.0 * ip * v).collect();
    let g2 = k1.data().iter().map(|&v| 2.0 * ip * v).collect();
    Ok((
        Tensor::new(k1.shape().to_vec(), g1).expect("same shape"),
        Tensor::new(k2.shape().to_vec(), g2).expect("same shape"),
    ))
}

/// Squared feature-map inner product under the given padding; squared so the
/// recorded similarity is sign-invariant, mirroring the squared form used
/// for kernels.
pub fn feature_map_similarity_metric(
    x: &[f64],
    k1: &[f64],
    k2: &[f64],
    pad: crate::signal::PaddingSpec,
) -> std::result::Result<f64, crate::signal::SignalError> {
    let ip = crate::signal::feature_inner_product(x, k1, k2, pad)?;
    Ok(ip * ip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{sample_uniform_from, RngStream};
    use crate::signal::PaddingSpec;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * f64::max(1.0, f64::max(a.abs(), b.abs()))
    }

    fn random_bank(rng: &mut impl rand::Rng, s: usize, c: usize, spatial: Spatial) -> KernelBank {
        let shape = match spatial {
            Spatial::OneD(n) => vec![s, c, n],
            Spatial::TwoD(h, w) => vec![s, c, h, w],
        };
        let weights = sample_uniform_from(rng, -1.0, 1.0, shape).unwrap();
        KernelBank::new(s, c, spatial, weights).unwrap()
    }

    #[test]
    fn pair_loss_hand_cases() {
        let zero = Tensor::from_vec(vec![0.0, 0.0]);
        let k1 = Tensor::from_vec(vec![1.0, 0.0]);
        assert_eq!(conv_sim_pair(&k1, &zero).unwrap(), 0.0);

        // Lags (0, 0, 1): loss 1.
        let k2 = Tensor::from_vec(vec![0.0, 1.0]);
        assert_eq!(conv_sim_pair(&k1, &k2).unwrap(), 1.0);

        // Orthogonal as vectors, lags (1, 0, -1): loss 2.
        let a = Tensor::from_vec(vec![1.0, 1.0]);
        let b = Tensor::from_vec(vec![1.0, -1.0]);
        assert_eq!(crate::numerics::inner_product(&a, &b).unwrap(), 0.0);
        assert_eq!(kernel_similarity(&a, &b).unwrap(), 0.0);
        assert_eq!(conv_sim_pair(&a, &b).unwrap(), 2.0);
    }

    #[test]
    fn pair_loss_commutative_and_nonnegative() {
        let mut rng = RngStream::new(20, 0).rng();
        for _ in 0..100 {
            let k1 = sample_uniform_from(&mut rng, -1.0, 1.0, vec![7]).unwrap();
            let k2 = sample_uniform_from(&mut rng, -1.0, 1.0, vec![7]).unwrap();
            let ab = conv_sim_pair(&k1, &k2).unwrap();
            let ba = conv_sim_pair(&k2, &k1).unwrap();
            assert!(ab >= 0.0);
            assert!(close(ab, ba, 1e-12));
        }
    }

    #[test]
    fn bank_of_two_matches_pair() {
        let mut rng = RngStream::new(21, 0).rng();
        for n in [2usize, 3, 9, 16] {
            let k1 = sample_uniform_from(&mut rng, -1.0, 1.0, vec![n]).unwrap();
            let k2 = sample_uniform_from(&mut rng, -1.0, 1.0, vec![n]).unwrap();
            let bank = KernelBank::from_pair(k1.data(), k2.data()).unwrap();
            let pair = conv_sim_pair(&k1, &k2).unwrap();
            let bank_loss = conv_sim_bank(&bank).unwrap().value;
            assert!(close(pair, bank_loss, 1e-12), "n={n}: {pair} vs {bank_loss}");
        }
    }

    #[test]
    fn ordered_is_twice_unordered() {
        let mut rng = RngStream::new(22, 0).rng();
        for (s, c, spatial) in [
            (2, 1, Spatial::OneD(5)),
            (4, 3, Spatial::OneD(3)),
            (3, 2, Spatial::TwoD(3, 3)),
        ] {
            let bank = random_bank(&mut rng, s, c, spatial);
            let unordered = conv_sim_bank(&bank).unwrap().value;
            let ordered = conv_sim_bank_with(&bank, PairEnumeration::Ordered)
                .unwrap()
                .value;
            assert!(
                close(ordered, 2.0 * unordered, 1e-12),
                "{ordered} vs 2*{unordered}"
            );
        }
    }

    #[test]
    fn gram_route_matches_direct_pair_sums() {
        let mut rng = RngStream::new(23, 0).rng();
        for (s, c, spatial) in [
            (3, 1, Spatial::OneD(4)),
            (2, 3, Spatial::OneD(9)),
            (4, 2, Spatial::TwoD(3, 3)),
            (2, 2, Spatial::TwoD(2, 4)),
        ] {
            let bank = random_bank(&mut rng, s, c, spatial);
            let (h, w) = spatial.hw();
            let mut direct = 0.0;
            for i in 0..s {
                for j in (i + 1)..s {
                    for c1 in 0..c {
                        for c2 in 0..c {
                            direct +=
                                pair_loss_direct(bank.channel(i, c1), bank.channel(j, c2), h, w);
                        }
                    }
                }
            }
            let fast = conv_sim_bank(&bank).unwrap().value;
            assert!(close(direct, fast, 1e-12), "{direct} vs {fast}");
        }
    }

    #[test]
    fn zero_bank_has_zero_loss_and_gradient() {
        let weights = Tensor::zeros(vec![3, 2, 5]).unwrap();
        let bank = KernelBank::new(3, 2, Spatial::OneD(5), weights).unwrap();
        let lv = conv_sim_value_and_grad(&bank).unwrap();
        assert_eq!(lv.value, 0.0);
        assert!(lv.gradient.unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn degenerate_bank_rejected() {
        let weights = Tensor::zeros(vec![1, 1, 3]).unwrap();
        let bank = KernelBank::new(1, 1, Spatial::OneD(3), weights).unwrap();
        assert_eq!(
            conv_sim_bank(&bank).unwrap_err(),
            ConvSimError::DegenerateBank(1)
        );
    }

    #[test]
    fn grad_matches_finite_differences_small() {
        let mut rng = RngStream::new(24, 0).rng();
        let bank = random_bank(&mut rng, 2, 1, Spatial::OneD(3));
        let grad = conv_sim_grad(&bank).unwrap();
        let h = 1e-6;
        for idx in 0..bank.weights().len() {
            let mut plus = bank.clone();
            plus.weights_mut().data_mut()[idx] += h;
            let mut minus = bank.clone();
            minus.weights_mut().data_mut()[idx] -= h;
            let fd = (conv_sim_bank(&plus).unwrap().value - conv_sim_bank(&minus).unwrap().value)
                / (2.0 * h);
            let g = grad.data()[idx];
            assert!(
                (fd - g).abs() <= 1e-6 * f64::max(1.0, g.abs()),
                "idx {idx}: fd={fd} analytic={g}"
            );
        }
    }

    #[test]
    fn kernel_similarity_hand_cases() {
        let k1 = Tensor::from_vec(vec![1.0, 2.0]);
        let k2 = Tensor::from_vec(vec![2.0, 1.0]);
        assert_eq!(kernel_similarity(&k1, &k2).unwrap(), 16.0);

        let orth = Tensor::from_vec(vec![2.0, -1.0]);
        assert_eq!(kernel_similarity(&k1, &orth).unwrap(), 0.0);

        let norm4 = kernel_similarity(&k1, &k1).unwrap();
        assert_eq!(norm4, 25.0); // ||k||^4 = (1+4)^2
    }

    #[test]
    fn kernel_similarity_grad_cases() {
        let k1 = Tensor::from_vec(vec![1.0, 2.0]);
        let orth = Tensor::from_vec(vec![2.0, -1.0]);
        let (g1, g2) = kernel_similarity_grad(&k1, &orth).unwrap();
        assert!(g1.iter().all(|&v| v == 0.0));
        assert!(g2.iter().all(|&v| v == 0.0));

        let zeros = Tensor::from_vec(vec![0.0, 0.0]);
        let (g1, g2) = kernel_similarity_grad(&k1, &zeros).unwrap();
        assert!(g1.iter().all(|&v| v == 0.0));
        assert!(g2.iter().all(|&v| v == 0.0));

        // Finite differences on a random pair.
        let mut rng = RngStream::new(25, 0).rng();
        let a = sample_uniform_from(&mut rng, -1.0, 1.0, vec![5]).unwrap();
        let b = sample_uniform_from(&mut rng, -1.0, 1.0, vec![5]).unwrap();
        let (ga, _) = kernel_similarity_grad(&a, &b).unwrap();
        let h = 1e-6;
        for idx in 0..a.len() {
            let mut plus = a.clone();
            plus.data_mut()[idx] += h;
            let mut minus = a.clone();
            minus.data_mut()[idx] -= h;
            let fd = (kernel_similarity(&plus, &b).unwrap()
                - kernel_similarity(&minus, &b).unwrap())
                / (2.0 * h);
            assert!((fd - ga.data()[idx]).abs() <= 1e-6 * f64::max(1.0, ga.data()[idx].abs()));
        }
    }

    #[test]
    fn metric_is_squared_inner_product() {
        let mut rng = RngStream::new(26, 0).rng();
        for _ in 0..50 {
            let x = sample_uniform_from(&mut rng, 0.0, 1.0, vec![24]).unwrap();
            let k1 = sample_uniform_from(&mut rng, -1.0, 1.0, vec![5]).unwrap();
            let k2 = sample_uniform_from(&mut rng, -1.0, 1.0, vec![5]).unwrap();
            let ip = crate::signal::feature_inner_product(
                x.data(),
                k1.data(),
                k2.data(),
                PaddingSpec::Full,
            )
            .unwrap();
            let metric =
                feature_map_similarity_metric(x.data(), k1.data(), k2.data(), PaddingSpec::Full)
                    .unwrap();
            assert!(close(metric, ip * ip, 1e-12));
            assert!(metric >= 0.0);

            // Scaling k2 by lambda scales the metric by lambda^2.
            let scaled: Vec<f64> = k2.iter().map(|&v| 3.0 * v).collect();
            let scaled_metric =
                feature_map_similarity_metric(x.data(), k1.data(), &scaled, PaddingSpec::Full)
                    .unwrap();
            assert!(close(scaled_metric, 9.0 * metric, 1e-12));
        }
    }

    #[test]
    fn zero_pair_loss_forces_feature_orthogonality() {
        // The only exactly-zero pairs are degenerate, but the implication
        // must hold for them too: K2 = 0 gives zero loss and zero inner
        // product for every input.
        let mut rng = RngStream::new(27, 0).rng();
        let k1 = sample_uniform_from(&mut rng, -1.0, 1.0, vec![4]).unwrap();
        let zeros = vec![0.0; 4];
        assert_eq!(
            conv_sim_pair(&k1, &Tensor::from_vec(zeros.clone())).unwrap(),
            0.0
        );
        for _ in 0..20 {
            let x = sample_uniform_from(&mut rng, 0.0, 1.0, vec![32]).unwrap();
            let ip =
                crate::signal::feature_inner_product(x.data(), k1.data(), &zeros, PaddingSpec::Full)
                    .unwrap();
            assert_eq!(ip, 0.0);
        }
    }
}
