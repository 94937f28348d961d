//! Dataset ingestion: the standard 32x32 RGB binary batch format, a
//! deterministic synthetic stand-in for environments without the real data,
//! and seeded batching.

use crate::numerics::{RngStream, Tensor};
use rand::Rng;
use std::io::Read;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot open {path}: {source}")]
    Open {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: expected {expected} bytes ({records} records of {record_len}), got {got}")]
    BadLength {
        path: PathBuf,
        expected: usize,
        records: usize,
        record_len: usize,
        got: usize,
    },
    #[error("{path}: label byte {label} > 9 at offset {offset}")]
    BadLabel {
        path: PathBuf,
        label: u8,
        offset: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, DataError>;

pub const IMAGE_DIM: usize = 32;
pub const IMAGE_CHANNELS: usize = 3;
pub const IMAGE_PIXELS: usize = IMAGE_CHANNELS * IMAGE_DIM * IMAGE_DIM;
const RECORD_LEN: usize = 1 + IMAGE_PIXELS;
const RECORDS_PER_FILE: usize = 10_000;

/// Images as `[count, 3, 32, 32]` reals in `[0, 1]` with labels in `[0, 10)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Tensor,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn image(&self, i: usize) -> &[f64] {
        &self.images.data()[i * IMAGE_PIXELS..(i + 1) * IMAGE_PIXELS]
    }

    /// Splits off the first `n` records, returning `(head, tail)`.
    pub fn split_at(self, n: usize) -> Result<(Dataset, Dataset)> {
        if n == 0 || n >= self.len() {
            return Err(DataError::InvalidArgument(format!(
                "split at {n} of {} records",
                self.len()
            )));
        }
        let head_images = self.images.data()[..n * IMAGE_PIXELS].to_vec();
        let tail_images = self.images.data()[n * IMAGE_PIXELS..].to_vec();
        let tail_count = self.len() - n;
        let head = Dataset {
            images: Tensor::new(vec![n, IMAGE_CHANNELS, IMAGE_DIM, IMAGE_DIM], head_images)
                .expect("consistent shape"),
            labels: self.labels[..n].to_vec(),
        };
        let tail = Dataset {
            images: Tensor::new(
                vec![tail_count, IMAGE_CHANNELS, IMAGE_DIM, IMAGE_DIM],
                tail_images,
            )
            .expect("consistent shape"),
            labels: self.labels[n..].to_vec(),
        };
        Ok((head, tail))
    }

    /// Seeded sample of `count` records without replacement.
    pub fn subset(&self, count: usize, stream: RngStream) -> Result<Dataset> {
        if count == 0 || count > self.len() {
            return Err(DataError::InvalidArgument(format!(
                "subset of {count} from {} records",
                self.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        shuffle(&mut order, &mut stream.rng());
        order.truncate(count);
        let mut data = Vec::with_capacity(count * IMAGE_PIXELS);
        let mut labels = Vec::with_capacity(count);
        for &i in &order {
            data.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        Ok(Dataset {
            images: Tensor::new(vec![count, IMAGE_CHANNELS, IMAGE_DIM, IMAGE_DIM], data)
                .expect("consistent shape"),
            labels,
        })
    }
}

fn parse_batch_file(path: &Path, data: &mut Vec<f64>, labels: &mut Vec<u8>) -> Result<()> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|source| DataError::Open {
            path: path.to_path_buf(),
            source,
        })?;
    let expected = RECORDS_PER_FILE * RECORD_LEN;
    if bytes.len() != expected {
        return Err(DataError::BadLength {
            path: path.to_path_buf(),
            expected,
            records: RECORDS_PER_FILE,
            record_len: RECORD_LEN,
            got: bytes.len(),
        });
    }
    for (r, record) in bytes.chunks_exact(RECORD_LEN).enumerate() {
        let label = record[0];
        if label > 9 {
            return Err(DataError::BadLabel {
                path: path.to_path_buf(),
                label,
                offset: r * RECORD_LEN,
            });
        }
        labels.push(label);
        data.extend(record[1..].iter().map(|&b| b as f64 / 255.0));
    }
    Ok(())
}

/// Loads the binary batch files (`data_batch_{1..5}.bin`, `test_batch.bin`):
/// 50,000 training and 10,000 test records, each one label byte followed by
/// 3072 pixel bytes (1024 R, 1024 G, 1024 B, row-major), scaled by 1/255.
pub fn load_cifar10(dir: &Path) -> Result<(Dataset, Dataset)> {
    let mut train_data = Vec::with_capacity(5 * RECORDS_PER_FILE * IMAGE_PIXELS);
    let mut train_labels = Vec::with_capacity(5 * RECORDS_PER_FILE);
    for i in 1..=5 {
        parse_batch_file(
            &dir.join(format!("data_batch_{i}.bin")),
            &mut train_data,
            &mut train_labels,
        )?;
    }
    let mut test_data = Vec::with_capacity(RECORDS_PER_FILE * IMAGE_PIXELS);
    let mut test_labels = Vec::with_capacity(RECORDS_PER_FILE);
    parse_batch_file(&dir.join("test_batch.bin"), &mut test_data, &mut test_labels)?;

    let make = |count: usize, data: Vec<f64>, labels: Vec<u8>| Dataset {
        images: Tensor::new(vec![count, IMAGE_CHANNELS, IMAGE_DIM, IMAGE_DIM], data)
            .expect("consistent shape"),
        labels,
    };
    Ok((
        make(train_labels.len(), train_data, train_labels),
        make(test_labels.len(), test_data, test_labels),
    ))
}

fn add_sinusoids<R: Rng>(
    rng: &mut R,
    buf: &mut [f64],
    components: usize,
    amp_lo: f64,
    amp_hi: f64,
) {
    for ch in 0..IMAGE_CHANNELS {
        for _ in 0..components {
            let fi: f64 = rng.gen_range(-3.0..3.0);
            let fj: f64 = rng.gen_range(-3.0..3.0);
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let amp: f64 = rng.gen_range(amp_lo..amp_hi);
            for i in 0..IMAGE_DIM {
                for j in 0..IMAGE_DIM {
                    let arg = std::f64::consts::TAU * (fi * i as f64 + fj * j as f64)
                        / IMAGE_DIM as f64
                        + phase;
                    buf[ch * IMAGE_DIM * IMAGE_DIM + i * IMAGE_DIM + j] += amp * arg.sin();
                }
            }
        }
    }
}

/// Deterministic synthetic classification set, rendered as 3x32x32 reals in
/// `[0, 1]`: each class is a fixed low-frequency color pattern, and every
/// sample adds its own smooth distractor pattern from the same frequency
/// band plus mild pixel noise. The distractors overlap the class signal, so
/// a small CNN cannot saturate a few thousand samples within a few epochs,
/// while the class signal still beats chance quickly.
pub fn synthetic_dataset(seed: u64, count: usize, classes: usize) -> Result<Dataset> {
    if classes == 0 || classes > 256 {
        return Err(DataError::InvalidArgument(format!(
            "classes must be in [1, 256], got {classes}"
        )));
    }
    if count < classes {
        return Err(DataError::InvalidArgument(format!(
            "count {count} smaller than classes {classes}"
        )));
    }

    let mut template_rng = RngStream::new(seed, 1).rng();
    let mut templates = vec![0.0; classes * IMAGE_PIXELS];
    for template in templates.chunks_exact_mut(IMAGE_PIXELS) {
        add_sinusoids(&mut template_rng, template, 3, 0.05, 0.11);
    }

    let mut rng = RngStream::new(seed, 0).rng();
    let mut data = Vec::with_capacity(count * IMAGE_PIXELS);
    let mut labels = Vec::with_capacity(count);
    let mut distractor = vec![0.0; IMAGE_PIXELS];
    for s in 0..count {
        let class = s % classes;
        labels.push(class as u8);
        let template = &templates[class * IMAGE_PIXELS..(class + 1) * IMAGE_PIXELS];
        distractor.fill(0.0);
        add_sinusoids(&mut rng, &mut distractor, 6, 0.08, 0.18);
        for (&t, &d) in template.iter().zip(&distractor) {
            let noise: f64 = rng.gen_range(-0.08..0.08);
            data.push((0.5 + t + d + noise).clamp(0.0, 1.0));
        }
    }
    Ok(Dataset {
        images: Tensor::new(vec![count, IMAGE_CHANNELS, IMAGE_DIM, IMAGE_DIM], data)
            .expect("consistent shape"),
        labels,
    })
}

/// Synthetic train/test pair drawn from the same class templates.
pub fn synthetic_split(
    seed: u64,
    train_count: usize,
    test_count: usize,
    classes: usize,
) -> Result<(Dataset, Dataset)> {
    synthetic_dataset(seed, train_count + test_count, classes)?.split_at(train_count)
}

fn shuffle<R: Rng>(order: &mut [usize], rng: &mut R) {
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
}

/// Deterministic batch iterator. The shuffle order depends only on
/// `(seed, epoch)`; the final partial batch is included.
pub fn batches(
    ds: &Dataset,
    batch_size: usize,
    seed: u64,
    epoch: u64,
    shuffle_data: bool,
) -> Result<impl Iterator<Item = (Tensor, Vec<u8>)> + '_> {
    if batch_size == 0 {
        return Err(DataError::InvalidArgument("batch_size must be >= 1".into()));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    if shuffle_data {
        shuffle(&mut order, &mut RngStream::new(seed, epoch).rng());
    }
    Ok(BatchIter {
        ds,
        order,
        batch_size,
        cursor: 0,
    })
}

struct BatchIter<'a> {
    ds: &'a Dataset,
    order: Vec<usize>,
    batch_size: usize,
    cursor: usize,
}

impl Iterator for BatchIter<'_> {
    type Item = (Tensor, Vec<u8>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.cursor >= self.order.len() {
            return None;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let idx = &self.order[self.cursor..end];
        self.cursor = end;
        let mut data = Vec::with_capacity(idx.len() * IMAGE_PIXELS);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            data.extend_from_slice(self.ds.image(i));
            labels.push(self.ds.labels[i]);
        }
        Some((
            Tensor::new(vec![idx.len(), IMAGE_CHANNELS, IMAGE_DIM, IMAGE_DIM], data)
                .expect("consistent shape"),
            labels,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_fake_batch(path: &Path, records: usize) {
        let mut f = std::fs::File::create(path).unwrap();
        let mut record = vec![0u8; RECORD_LEN];
        for r in 0..records {
            record[0] = (r % 10) as u8;
            for (i, b) in record[1..].iter_mut().enumerate() {
                *b = ((r * 31 + i * 7) % 256) as u8;
            }
            f.write_all(&record).unwrap();
        }
    }

    fn write_archive(dir: &Path) {
        for i in 1..=5 {
            write_fake_batch(&dir.join(format!("data_batch_{i}.bin")), RECORDS_PER_FILE);
        }
        write_fake_batch(&dir.join("test_batch.bin"), RECORDS_PER_FILE);
    }

    #[test]
    fn well_formed_archive_loads_with_standard_counts() {
        let dir = tempfile::tempdir().unwrap();
        write_archive(dir.path());
        let (train, test) = load_cifar10(dir.path()).unwrap();
        assert_eq!(train.len(), 50_000);
        assert_eq!(test.len(), 10_000);
        assert!(train.images.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(train.images.shape(), &[50_000, 3, 32, 32]);
    }

    #[test]
    fn truncated_file_is_rejected_with_path() {
        let dir = tempfile::tempdir().unwrap();
        write_archive(dir.path());
        let victim = dir.path().join("data_batch_3.bin");
        let bytes = std::fs::read(&victim).unwrap();
        std::fs::write(&victim, &bytes[..bytes.len() - 100]).unwrap();
        let err = load_cifar10(dir.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("data_batch_3.bin"), "{msg}");
        assert!(matches!(err, DataError::BadLength { .. }));
    }

    #[test]
    fn mutated_lengths_always_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("test_batch.bin");
        let mut rng = RngStream::new(99, 0).rng();
        for _ in 0..20 {
            let records = RECORDS_PER_FILE;
            write_fake_batch(&path, records);
            let bytes = std::fs::read(&path).unwrap();
            let cut: usize = rng.gen_range(1..bytes.len());
            std::fs::write(&path, &bytes[..cut]).unwrap();
            let mut data = Vec::new();
            let mut labels = Vec::new();
            assert!(parse_batch_file(&path, &mut data, &mut labels).is_err());
        }
    }

    #[test]
    fn bad_label_byte_is_rejected_with_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("test_batch.bin");
        write_fake_batch(&path, RECORDS_PER_FILE);
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[2 * RECORD_LEN] = 17;
        std::fs::write(&path, &bytes).unwrap();
        let mut data = Vec::new();
        let mut labels = Vec::new();
        match parse_batch_file(&path, &mut data, &mut labels).unwrap_err() {
            DataError::BadLabel { label, offset, .. } => {
                assert_eq!(label, 17);
                assert_eq!(offset, 2 * RECORD_LEN);
            }
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn synthetic_is_deterministic_and_in_range() {
        let a = synthetic_dataset(5, 100, 10).unwrap();
        let b = synthetic_dataset(5, 100, 10).unwrap();
        assert_eq!(a, b);
        let c = synthetic_dataset(6, 100, 10).unwrap();
        assert_ne!(a, c);
        assert!(a.images.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn synthetic_labels_are_balanced() {
        let ds = synthetic_dataset(1, 105, 10).unwrap();
        let mut counts = [0usize; 10];
        for &l in &ds.labels {
            counts[l as usize] += 1;
        }
        let min = *counts.iter().min().unwrap();
        let max = *counts.iter().max().unwrap();
        assert!(max - min <= 1, "{counts:?}");
    }

    #[test]
    fn synthetic_rejects_count_below_classes() {
        assert!(synthetic_dataset(0, 5, 10).is_err());
    }

    #[test]
    fn batches_partition_the_dataset() {
        let ds = synthetic_dataset(3, 100, 10).unwrap();
        // Oversized batch: one batch of 100.
        let got: Vec<_> = batches(&ds, 512, 0, 0, false).unwrap().collect();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].1.len(), 100);

        // Shuffled epochs cover every sample exactly once.
        let mut label_counts = [0usize; 10];
        let mut total = 0;
        for (images, labels) in batches(&ds, 17, 9, 4, true).unwrap() {
            assert_eq!(images.shape()[0], labels.len());
            for &l in &labels {
                label_counts[l as usize] += 1;
            }
            total += labels.len();
        }
        assert_eq!(total, 100);
        assert_eq!(label_counts, [10; 10]);
    }

    #[test]
    fn batch_order_is_seed_and_epoch_deterministic() {
        let ds = synthetic_dataset(3, 64, 10).unwrap();
        let run = |seed, epoch| -> Vec<Vec<u8>> {
            batches(&ds, 8, seed, epoch, true)
                .unwrap()
                .map(|(_, l)| l)
                .collect()
        };
        assert_eq!(run(1, 0), run(1, 0));
        assert_ne!(run(1, 0), run(1, 1));
        assert_ne!(run(1, 0), run(2, 0));
    }

    #[test]
    fn subset_is_seeded_and_sized() {
        let ds = synthetic_dataset(8, 50, 10).unwrap();
        let a = ds.subset(20, RngStream::new(4, 0)).unwrap();
        let b = ds.subset(20, RngStream::new(4, 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        assert!(ds.subset(51, RngStream::new(4, 0)).is_err());
    }
}
