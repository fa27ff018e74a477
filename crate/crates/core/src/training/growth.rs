//! Greedy, leaf-by-leaf growth of soft trees.
//!
//! Growth starts from a single trained leaf. Each sweep visits the open leaves
//! breadth-first and tries to split each one: a fresh gate and two children
//! copying the leaf's payoff are added, and only those new parameters are
//! trained. The split is kept when it lowers validation loss by more than the
//! relative threshold over the unsplit leaf trained for the same number of
//! epochs; otherwise the leaf is closed.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::optim::{mean_loss, train_tree, train_tree_masked, TrainConfig};
use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::seed::derive_seed;
use crate::tree::{node_param_counts, GatingFilter, Node, Tree, Variant, MAX_SUPPORTED_DEPTH};

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthConfig {
    pub grow_epochs: usize,
    /// Minimum relative validation-loss improvement for a split to be kept.
    pub gain_threshold: f64,
    pub validation_fraction: f64,
    pub max_depth: usize,
    /// Independent random initializations tried per candidate split; the one
    /// with the lowest training loss competes against the unsplit leaf.
    pub candidates: usize,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            grow_epochs: 5,
            gain_threshold: 1e-3,
            validation_fraction: 0.1,
            max_depth: 5,
            candidates: 3,
        }
    }
}

impl GrowthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grow_epochs == 0 {
            return Err(Error::invalid("grow_epochs must be at least 1"));
        }
        if !(self.gain_threshold >= 0.0 && self.gain_threshold.is_finite()) {
            return Err(Error::invalid("gain_threshold must be non-negative"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction <= 0.5) {
            return Err(Error::invalid("validation_fraction must lie in (0, 0.5]"));
        }
        if self.max_depth > MAX_SUPPORTED_DEPTH {
            return Err(Error::invalid("max_depth exceeds supported maximum"));
        }
        if self.candidates == 0 {
            return Err(Error::invalid("candidates must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GrownTree {
    pub tree: Tree,
    pub accepted_splits: usize,
    pub rejected_splits: usize,
}

/// Mask selecting the parameters owned by the nodes at the given preorder
/// indices.
fn node_mask(tree: &Tree, nodes: &[usize]) -> Vec<bool> {
    tree.param_layout()
        .iter()
        .map(|slot| nodes.contains(&slot.node))
        .collect()
}

/// Replaces the leaf at `path` by a split whose hyperplane has a random
/// normal direction and passes through a random training sample.
fn split_leaf(tree: &Tree, path: &[bool], train: &Dataset, normal: &Normal<f64>, rng: &mut ChaCha8Rng) -> Tree {
    let mut out = tree.clone();
    let d = tree.input_dim();
    let node = out.node_at_mut(path).expect("path addresses an existing leaf");
    let payoff = node.payoff.clone();
    let weights: Vec<f64> = (0..d).map(|_| normal.sample(rng)).collect();
    let anchor = &train.samples()[rng.random_range(0..train.len())].features;
    let bias = -weights.iter().zip(anchor).map(|(w, x)| w * x).sum::<f64>();
    let filter = GatingFilter::new(weights, bias);
    *node = Node::internal(
        vec![filter],
        None,
        0.0,
        payoff.clone(),
        Node::leaf(payoff.clone()),
        Node::leaf(payoff),
    );
    out
}

pub fn grow_soft_tree(
    train: &Dataset,
    val: &Dataset,
    tconfig: &TrainConfig,
    gconfig: &GrowthConfig,
) -> Result<GrownTree> {
    tconfig.validate()?;
    gconfig.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_dim(train.feature_dim(), val.feature_dim())?;
    let d = train.feature_dim();
    let c = train.class_count().max(val.class_count());

    let mut tree = Tree::single_leaf(Variant::Soft, d, c, gconfig.max_depth)?;
    train_tree(&mut tree, train, tconfig)?;

    let grow_cfg = TrainConfig {
        epochs: gconfig.grow_epochs,
        ..tconfig.clone()
    };
    let normal = Normal::new(0.0, 1.0 / (d as f64).sqrt()).expect("positive std dev");
    let mut accepted = 0;
    let mut rejected = 0;
    let mut open: VecDeque<Vec<bool>> = VecDeque::new();
    if gconfig.max_depth > 0 {
        open.push_back(Vec::new());
    }

    let mut attempt = 0u64;
    while let Some(path) = open.pop_front() {
        attempt += 1;
        let leaf_index = tree.preorder_index(&path).expect("open paths address leaves");

        let mut baseline = tree.clone();
        let mask = node_mask(&baseline, &[leaf_index]);
        train_tree_masked(&mut baseline, train, &grow_cfg, Some(&mask))?;
        let base_loss = mean_loss(&baseline, val)?;

        let mut best: Option<(f64, Tree)> = None;
        for k in 0..gconfig.candidates {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(tconfig.seed, attempt, k as u64));
            let mut cand = split_leaf(&tree, &path, train, &normal, &mut rng);
            let mask = node_mask(&cand, &[leaf_index, leaf_index + 1, leaf_index + 2]);
            debug_assert_eq!(
                mask.iter().filter(|m| **m).count(),
                node_param_counts(cand.node_at(&path).unwrap(), Variant::Soft, d).0 + 2 * c
            );
            train_tree_masked(&mut cand, train, &grow_cfg, Some(&mask))?;
            let fit = mean_loss(&cand, train)?;
            if best.as_ref().is_none_or(|(b, _)| fit < *b) {
                best = Some((fit, cand));
            }
        }
        let (_, cand) = best.expect("at least one candidate");
        let cand_loss = mean_loss(&cand, val)?;

        let gain = if base_loss > 0.0 {
            (base_loss - cand_loss) / base_loss
        } else {
            0.0
        };
        if gain > gconfig.gain_threshold {
            tree = cand;
            accepted += 1;
            if path.len() + 1 < gconfig.max_depth {
                for side in [false, true] {
                    let mut child = path.clone();
                    child.push(side);
                    open.push_back(child);
                }
            }
        } else {
            tree = baseline;
            rejected += 1;
        }
    }

    Ok(GrownTree {
        tree,
        accepted_splits: accepted,
        rejected_splits: rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_blobs, make_xor, Sample};
    use crate::training::tree_accuracy;

    #[test]
    fn single_class_stays_a_leaf() {
        let samples = (0..80).map(|i| Sample::new(vec![i as f64 / 80.0, 0.5], 0)).collect();
        let data = Dataset::new(samples, 2, 2).unwrap();
        let (train, val) = data.split(0.25, 1);
        let g = grow_soft_tree(&train, &val, &TrainConfig::default(), &GrowthConfig::default()).unwrap();
        assert_eq!(g.tree.node_count(), 1);
        assert_eq!(g.accepted_splits, 0);
    }

    /// Small fixtures need several SGD steps per epoch.
    fn small_data_config(seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: 16,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn blobs_need_at_most_one_split() {
        for seed in 0..5 {
            let (train, val) = make_blobs(100, 0.5, seed).split(0.2, seed);
            let g = grow_soft_tree(&train, &val, &small_data_config(seed), &GrowthConfig::default()).unwrap();
            assert_eq!(g.tree.depth(), 1, "seed {seed}");
            assert_eq!(g.accepted_splits, 1);
            assert!(tree_accuracy(&g.tree, &val).unwrap() >= 0.99);
        }
    }

    #[test]
    fn xor_grows_past_depth_one() {
        for seed in 0..5 {
            let (train, val) = make_xor(100, 0.5, seed).split(0.2, seed);
            let g = grow_soft_tree(&train, &val, &small_data_config(seed), &GrowthConfig::default()).unwrap();
            assert!(g.tree.depth() >= 2, "depth {}", g.tree.depth());
            assert!(g.tree.depth() <= GrowthConfig::default().max_depth);
            assert!(tree_accuracy(&g.tree, &val).unwrap() >= 0.95);
        }
    }

    #[test]
    fn rejects_empty_inputs() {
        let e = Dataset::empty(2, 2);
        let d = make_blobs(5, 0.1, 0);
        assert!(grow_soft_tree(&e, &d, &TrainConfig::default(), &GrowthConfig::default()).is_err());
        assert!(grow_soft_tree(&d, &e, &TrainConfig::default(), &GrowthConfig::default()).is_err());
    }
}
