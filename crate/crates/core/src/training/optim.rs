use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::grad::{accumulate_gradient, GradBuffer, Workspace};
use super::loss::cross_entropy;
use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::tree::Tree;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            momentum: 0.9,
            batch_size: 64,
            epochs: 20,
            seed: 0,
            lr_decay_factor: 0.5,
            lr_decay_every: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::invalid(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail("momentum must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return fail("lr_decay_factor must lie in (0, 1]");
        }
        if self.lr_decay_every == 0 {
            return fail("lr_decay_every must be at least 1");
        }
        Ok(())
    }

    /// Step size in effect during `epoch` (0-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let decays = (epoch / self.lr_decay_every) as i32;
        self.learning_rate * self.lr_decay_factor.powi(decays)
    }
}

/// Per-epoch mean training loss.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epoch_losses: Vec<f64>,
}

impl TrainLog {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_losses.last().copied()
    }
}

/// Momentum update `v ← μ v − lr g`, `θ ← θ + v`, in place.
pub fn sgd_step(tree: &mut Tree, grads: &GradBuffer, velocity: &mut GradBuffer, config: &TrainConfig) -> Result<()> {
    let n = tree.count_parameters();
    grads.check_len(n)?;
    velocity.check_len(n)?;
    apply_update(
        tree,
        grads.values(),
        velocity.values_mut(),
        config.learning_rate,
        config.momentum,
        None,
    );
    Ok(())
}

fn apply_update(tree: &mut Tree, g: &[f64], v: &mut [f64], lr: f64, momentum: f64, mask: Option<&[bool]>) {
    tree.for_each_param_mut(|i, theta| {
        if mask.is_some_and(|m| !m[i]) {
            return;
        }
        v[i] = momentum * v[i] - lr * g[i];
        *theta += v[i];
    });
}

/// Mini-batch SGD with momentum over seeded shuffles of `data`.
pub fn train_tree(tree: &mut Tree, data: &Dataset, config: &TrainConfig) -> Result<TrainLog> {
    train_tree_masked(tree, data, config, None)
}

/// Like [`train_tree`], but only parameters whose `mask` entry is true move.
pub fn train_tree_masked(
    tree: &mut Tree,
    data: &Dataset,
    config: &TrainConfig,
    mask: Option<&[bool]>,
) -> Result<TrainLog> {
    train_inner(tree, data, None, config, mask)
}

/// Like [`train_tree`] on the multiset `data[indices[k]]`, without copying
/// samples. Equal to training on `data.select(indices)`.
pub fn train_tree_indexed(
    tree: &mut Tree,
    data: &Dataset,
    indices: &[usize],
    config: &TrainConfig,
) -> Result<TrainLog> {
    if let Some(&bad) = indices.iter().find(|&&i| i >= data.len()) {
        return Err(Error::invalid(format!(
            "sample index {bad} out of range for {} samples",
            data.len()
        )));
    }
    train_inner(tree, data, Some(indices), config, None)
}

fn train_inner(
    tree: &mut Tree,
    data: &Dataset,
    indices: Option<&[usize]>,
    config: &TrainConfig,
    mask: Option<&[bool]>,
) -> Result<TrainLog> {
    config.validate()?;
    let n = indices.map_or(data.len(), <[usize]>::len);
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    check_dim(tree.input_dim(), data.feature_dim())?;
    if data.class_count() > tree.class_count() {
        return Err(Error::LabelOutOfRange {
            label: data.class_count() - 1,
            classes: tree.class_count(),
        });
    }
    let n_params = tree.count_parameters();
    if let Some(m) = mask {
        if m.len() != n_params {
            return Err(Error::ShapeMismatch {
                expected: n_params,
                found: m.len(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; n_params];
    let mut velocity = vec![0.0; n_params];
    let mut ws = Workspace::new();
    let samples = data.samples();
    let mut log = TrainLog::default();

    for epoch in 0..config.epochs {
        let lr = config.learning_rate_at(epoch);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let s = &samples[indices.map_or(i, |m| m[i])];
                epoch_loss += accumulate_gradient(tree, &s.features, s.label, scale, &mut grad, &mut ws);
            }
            apply_update(tree, &grad, &mut velocity, lr, config.momentum, mask);
        }
        log.epoch_losses.push(epoch_loss / n as f64);
    }
    Ok(log)
}

/// Mean cross-entropy of a single tree over a dataset.
pub fn mean_loss(tree: &Tree, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for s in data {
        total += cross_entropy(&tree.forward(&s.features)?.scores, s.label);
    }
    Ok(total / data.len() as f64)
}

/// Fraction of samples whose highest-scoring class (lowest index on ties)
/// equals the label.
pub fn tree_accuracy(tree: &Tree, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut hits = 0usize;
    for s in data {
        if argmax(&tree.forward(&s.features)?.scores) == s.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}
