//! Datasets, MNIST ingestion, augmentation and synthetic fixtures.

mod augment;
mod idx;
mod mnist;
mod synthetic;

pub use augment::{augment, build_augmented_dataset, AugmentConfig};
pub use idx::{
    parse_idx_images, parse_idx_labels, write_idx_images, write_idx_labels, IdxError, IdxImages, IDX_IMAGES_MAGIC,
    IDX_LABELS_MAGIC,
};
pub use mnist::{load_mnist, load_mnist_split, MnistSplit, DATA_DIR_ENV};
pub use synthetic::{make_blobs, make_xor};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Sample { features, label }
    }
}

/// An ordered collection of samples sharing one feature length and class count.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    feature_dim: usize,
    class_count: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, feature_dim: usize, class_count: usize) -> Result<Self> {
        if class_count == 0 {
            return Err(Error::invalid("class count must be positive"));
        }
        for s in &samples {
            if s.features.len() != feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: feature_dim,
                    found: s.features.len(),
                });
            }
            if s.label >= class_count {
                return Err(Error::LabelOutOfRange {
                    label: s.label,
                    classes: class_count,
                });
            }
        }
        Ok(Dataset {
            samples,
            feature_dim,
            class_count,
        })
    }

    /// Empty dataset with the given shape.
    pub fn empty(feature_dim: usize, class_count: usize) -> Self {
        Dataset {
            samples: Vec::new(),
            feature_dim,
            class_count,
        }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sample> {
        self.samples.iter()
    }

    /// Per-class sample counts.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// The first `n` samples after a seeded shuffle (`n = 0` keeps everything).
    pub fn shuffled_subset(&self, n: usize, seed: u64) -> Dataset {
        if n == 0 || n >= self.len() {
            return self.clone();
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        order.truncate(n);
        self.select(&order)
    }

    /// Samples at the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            feature_dim: self.feature_dim,
            class_count: self.class_count,
        }
    }

    /// Splits off the trailing `fraction` of a seeded shuffle as a second set.
    pub fn split(&self, fraction: f64, seed: u64) -> (Dataset, Dataset) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let held = ((self.len() as f64) * fraction).round() as usize;
        let held = held.min(self.len());
        let (keep, hold) = order.split_at(self.len() - held);
        (self.select(keep), self.select(hold))
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Sample;
    type IntoIter = std::slice::Iter<'a, Sample>;

    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}
