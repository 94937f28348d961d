//! Dense row-major `f64` tensors, deterministic RNG streams, and the small
//! set of scalar statistics the rest of the crate is built on.
//!
//! Everything is 64-bit: the correlation identities this crate verifies are
//! exact in real arithmetic, and `f64` keeps their residuals near machine
//! epsilon.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NumericsError {
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("shape {shape:?} implies {expected} elements, got {got}")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        got: usize,
    },
    #[error("zero extent in shape {0:?}")]
    ZeroExtent(Vec<usize>),
    #[error("invalid sampling range: lo={lo} must be < hi={hi}")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("correlation undefined: input sequence is constant")]
    UndefinedCorrelation,
    #[error("correlation needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("index {index:?} out of bounds for shape {shape:?}")]
    IndexOutOfBounds { index: Vec<usize>, shape: Vec<usize> },
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Dense multi-dimensional array of `f64` in row-major order.
///
/// `product(shape) == data.len()` always holds; indexing is bounds-checked.
/// Tensors are plain values: cloning copies, and a built tensor is safe to
/// share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(NumericsError::ZeroExtent(shape));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(NumericsError::DataLength {
                expected,
                got: data.len(),
                shape,
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(NumericsError::ZeroExtent(shape));
        }
        let len = shape.iter().product();
        Ok(Self {
            shape,
            data: vec![0.0; len],
        })
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Row-major flat offset of a multi-index.
    pub fn flatten_index(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.shape.len()
            || index.iter().zip(&self.shape).any(|(&i, &d)| i >= d)
        {
            return Err(NumericsError::IndexOutOfBounds {
                index: index.to_vec(),
                shape: self.shape.clone(),
            });
        }
        let mut flat = 0;
        for (&i, &d) in index.iter().zip(&self.shape) {
            flat = flat * d + i;
        }
        Ok(flat)
    }

    /// Inverse of [`flatten_index`](Self::flatten_index).
    pub fn unflatten_index(&self, mut flat: usize) -> Result<Vec<usize>> {
        if flat >= self.data.len() {
            return Err(NumericsError::IndexOutOfBounds {
                index: vec![flat],
                shape: self.shape.clone(),
            });
        }
        let mut index = vec![0; self.shape.len()];
        for (slot, &d) in index.iter_mut().zip(&self.shape).rev() {
            *slot = flat % d;
            flat /= d;
        }
        Ok(index)
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[self.flatten_index(index)?])
    }

    pub fn set(&mut self, index: &[usize], value: f64) -> Result<()> {
        let flat = self.flatten_index(index)?;
        self.data[flat] = value;
        Ok(())
    }

    /// Reinterprets the tensor under a new shape with the same element count.
    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(NumericsError::ZeroExtent(shape));
        }
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(NumericsError::DataLength {
                expected,
                got: self.data.len(),
                shape,
            });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self += scale * other`, elementwise.
    pub fn add_scaled(&mut self, other: &Tensor, scale: f64) -> Result<()> {
        if self.shape != other.shape {
            return Err(NumericsError::ShapeMismatch {
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }
}

/// Handle for one deterministic random stream.
///
/// The same `(base_seed, stream_index)` pair always yields the same sample
/// sequence, and distinct stream indices are statistically independent, so
/// episode `e` of an experiment can always draw from stream `e` no matter
/// which worker runs it or in what order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub base_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(base_seed: u64, stream_index: u64) -> Self {
        Self {
            base_seed,
            stream_index,
        }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Draws a tensor with elements uniform in `[lo, hi)` from the start of the
/// given stream. Pure: calling twice with equal arguments yields equal data.
pub fn sample_uniform(stream: RngStream, lo: f64, hi: f64, shape: Vec<usize>) -> Result<Tensor> {
    let mut rng = stream.rng();
    sample_uniform_from(&mut rng, lo, hi, shape)
}

/// As [`sample_uniform`] but advancing a caller-owned generator.
pub fn sample_uniform_from<R: Rng>(
    rng: &mut R,
    lo: f64,
    hi: f64,
    shape: Vec<usize>,
) -> Result<Tensor> {
    if !(lo < hi) {
        return Err(NumericsError::InvalidRange { lo, hi });
    }
    if shape.iter().any(|&d| d == 0) {
        return Err(NumericsError::ZeroExtent(shape));
    }
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.gen_range(lo..hi)).collect();
    Tensor::new(shape, data)
}

/// Sum of elementwise products; shapes must match exactly.
pub fn inner_product(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(NumericsError::ShapeMismatch {
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    Ok(dot(a.data(), b.data()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pearson correlation coefficient of two equally long sequences.
///
/// A constant sequence has no defined correlation; the caller is expected to
/// drop such episodes from any averaged statistic.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(NumericsError::ShapeMismatch {
            left: vec![a.len()],
            right: vec![b.len()],
        });
    }
    if a.len() < 2 {
        return Err(NumericsError::TooFewPoints(a.len()));
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(NumericsError::UndefinedCorrelation);
    }
    let r = cov / (var_a.sqrt() * var_b.sqrt());
    // Guard against float drift pushing |r| infinitesimally past 1.
    Ok(r.clamp(-1.0, 1.0))
}

/// Mean and standard deviation (sample, `n-1` denominator) of a slice.
/// Returns `(0, 0)` for an empty slice and `(x, 0)` for a singleton.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
