//! Layer-wise deep forests.
//!
//! Layer 0 sees the raw input `x₀`. Every later layer sees the concatenation
//! of the previous layer's per-tree class distributions followed by `x₀`, so
//! its input dimension is `d₀ + C · k` where `k` is the previous layer's tree
//! count. Only the final layer votes: its tree distributions are averaged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Dataset, Sample};
use crate::error::{check_dim, Error, Result};
use crate::seed::derive_seed;
use crate::training::{argmax, softmax, train_tree_indexed, TrainConfig, TrainLog};
use crate::tree::{ParamCounts, Tree, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub tree_count: usize,
    pub variant: Variant,
    pub max_depth: usize,
    pub filters_per_node: usize,
}

impl LayerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.tree_count == 0 {
            return Err(Error::invalid("a layer needs at least one tree"));
        }
        if self.filters_per_node == 0 {
            return Err(Error::invalid("filters_per_node must be at least 1"));
        }
        if self.max_depth > crate::tree::MAX_SUPPORTED_DEPTH {
            return Err(Error::invalid("max_depth exceeds supported maximum"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub trees: Vec<Tree>,
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        self.trees.first().map_or(0, Tree::input_dim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    layers: Vec<Layer>,
    input_dim: usize,
    class_count: usize,
}

/// Class distribution and its argmax (lowest index on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub distribution: Vec<f64>,
    pub label: usize,
}

/// Expected input dimension of layer `index`.
pub fn layer_input_dim(input_dim: usize, class_count: usize, specs: &[LayerSpec], index: usize) -> usize {
    if index == 0 {
        input_dim
    } else {
        input_dim + class_count * specs[index - 1].tree_count
    }
}

impl ForestModel {
    /// Assembles a model from trained layers, checking shape invariants.
    pub fn from_layers(layers: Vec<Layer>, input_dim: usize, class_count: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a forest needs at least one layer"));
        }
        let specs: Vec<LayerSpec> = layers.iter().map(|l| l.spec).collect();
        for (i, layer) in layers.iter().enumerate() {
            layer.spec.validate()?;
            if layer.trees.len() != layer.spec.tree_count {
                return Err(Error::invalid(format!(
                    "layer {i} declares {} trees but holds {}",
                    layer.spec.tree_count,
                    layer.trees.len()
                )));
            }
            let want = layer_input_dim(input_dim, class_count, &specs, i);
            for (j, t) in layer.trees.iter().enumerate() {
                let bad = t.input_dim() != want
                    || t.class_count() != class_count
                    || t.variant() != layer.spec.variant
                    || t.max_depth() != layer.spec.max_depth
                    || t.filters_per_node().is_some_and(|f| f != layer.spec.filters_per_node);
                if bad {
                    return Err(Error::invalid(format!(
                        "tree {j} of layer {i} does not match the layer spec (input dim {want})"
                    )));
                }
                t.validate()?;
            }
        }
        Ok(ForestModel {
            layers,
            input_dim,
            class_count,
        })
    }

    /// Freshly initialized, untrained model.
    pub fn new_untrained(input_dim: usize, class_count: usize, specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut layers = Vec::with_capacity(specs.len());
        for (l, spec) in specs.iter().enumerate() {
            spec.validate()?;
            let d = layer_input_dim(input_dim, class_count, specs, l);
            let trees = (0..spec.tree_count)
                .map(|t| {
                    let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(seed, l, t));
                    Tree::new_complete(
                        spec.variant,
                        d,
                        class_count,
                        spec.max_depth,
                        spec.filters_per_node,
                        &mut rng,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            layers.push(Layer { spec: *spec, trees });
        }
        ForestModel::from_layers(layers, input_dim, class_count)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn count_parameters(&self) -> usize {
        self.parameter_counts().total()
    }

    pub fn parameter_counts(&self) -> ParamCounts {
        self.layers
            .iter()
            .flat_map(|l| l.trees.iter())
            .map(Tree::parameter_counts)
            .sum()
    }

    /// Representation fed to layer `layer` for raw input `x`.
    pub fn representation(&self, x: &[f64], layer: usize) -> Result<Vec<f64>> {
        check_dim(self.input_dim, x.len())?;
        let mut current = x.to_vec();
        for l in &self.layers[..layer] {
            current = layer_features(&l.trees, &current, x)?;
        }
        Ok(current)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let last = self.layers.len() - 1;
        let rep = self.representation(x, last)?;
        let trees = &self.layers[last].trees;
        let mut distribution = vec![0.0; self.class_count];
        for t in trees {
            for (acc, p) in distribution.iter_mut().zip(tree_distribution(t, &rep)?) {
                *acc += p;
            }
        }
        let k = trees.len() as f64;
        distribution.iter_mut().for_each(|p| *p /= k);
        let label = argmax(&distribution);
        Ok(Prediction { distribution, label })
    }

    /// Accuracy and confusion counts (`confusion[true][predicted]`).
    pub fn evaluate(&self, data: &Dataset) -> Result<Evaluation> {
        self.evaluate_with(data, 1)
    }

    pub fn evaluate_with(&self, data: &Dataset, workers: usize) -> Result<Evaluation> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        check_dim(self.input_dim, data.feature_dim())?;
        let labels: Vec<usize> = with_pool(workers, || {
            data.samples()
                .par_iter()
                .map(|s| self.predict(&s.features).map(|p| p.label))
                .collect::<Result<Vec<_>>>()
        })?;
        let c = self.class_count.max(data.class_count());
        let mut confusion = vec![vec![0usize; c]; c];
        for (s, &pred) in data.iter().zip(&labels) {
            confusion[s.label][pred] += 1;
        }
        let hits: usize = (0..c).map(|i| confusion[i][i]).sum();
        Ok(Evaluation {
            accuracy: hits as f64 / data.len() as f64,
            confusion,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
}

/// Softmax of the tree's root scores.
pub fn tree_distribution(tree: &Tree, x: &[f64]) -> Result<Vec<f64>> {
    Ok(softmax(&tree.forward(x)?.scores))
}

/// `[dist(t₁, input), …, dist(t_k, input), x_original]`.
pub fn layer_features(trees: &[Tree], input: &[f64], x_original: &[f64]) -> Result<Vec<f64>> {
    let c = trees.first().map_or(0, Tree::class_count);
    let mut out = Vec::with_capacity(c * trees.len() + x_original.len());
    for t in trees {
        out.extend(tree_distribution(t, input)?);
    }
    out.extend_from_slice(x_original);
    Ok(out)
}

/// `size` uniform draws with replacement.
pub fn bootstrap_sample(data: &Dataset, size: usize, seed: u64) -> Result<Dataset> {
    Ok(data.select(&bootstrap_indices(data.len(), size, seed)?))
}

/// The indices [`bootstrap_sample`] draws from a source of `len` samples.
pub fn bootstrap_indices(len: usize, size: usize, seed: u64) -> Result<Vec<usize>> {
    if len == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..size).map(|_| rng.random_range(0..len)).collect())
}

/// Seed of tree `t` in layer `l`; stable so any tree can be retrained alone.
pub fn tree_seed(seed: u64, layer: usize, tree: usize) -> u64 {
    derive_seed(seed, layer as u64, tree as u64)
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(f)
}

/// Options for [`train_forest_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestOptions {
    /// Threads used for per-tree training and feature materialization.
    /// Results do not depend on this value.
    pub workers: usize,
}

impl Default for ForestOptions {
    fn default() -> Self {
        ForestOptions { workers: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedForest {
    pub model: ForestModel,
    /// `logs[layer][tree]`.
    pub logs: Vec<Vec<TrainLog>>,
}

pub fn train_forest(train: &Dataset, specs: &[LayerSpec], tconfig: &TrainConfig, seed: u64) -> Result<TrainedForest> {
    train_forest_with(train, specs, tconfig, seed, ForestOptions::default())
}

/// Trains layers in order. Each tree gets its own bootstrap of the current
/// representation (same size as the training set) and its own seed from
/// [`tree_seed`]; the next layer's representation is materialized with all
/// earlier layers frozen.
pub fn train_forest_with(
    train: &Dataset,
    specs: &[LayerSpec],
    tconfig: &TrainConfig,
    seed: u64,
    options: ForestOptions,
) -> Result<TrainedForest> {
    if specs.is_empty() {
        return Err(Error::invalid("at least one layer spec is required"));
    }
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    tconfig.validate()?;
    for s in specs {
        s.validate()?;
    }
    let d0 = train.feature_dim();
    let c = train.class_count();

    // layer 0 reads the training set in place
    let mut owned: Option<Dataset> = None;
    let mut layers = Vec::with_capacity(specs.len());
    let mut logs = Vec::with_capacity(specs.len());
    for (l, spec) in specs.iter().enumerate() {
        let rep = owned.as_ref().unwrap_or(train);
        let trained: Vec<(Tree, TrainLog)> = with_pool(options.workers, || {
            (0..spec.tree_count)
                .into_par_iter()
                .map(|t| {
                    let ts = tree_seed(seed, l, t);
                    let boot = bootstrap_indices(rep.len(), rep.len(), ts)?;
                    let mut rng = ChaCha8Rng::seed_from_u64(ts);
                    let mut tree = Tree::new_complete(
                        spec.variant,
                        rep.feature_dim(),
                        c,
                        spec.max_depth,
                        spec.filters_per_node,
                        &mut rng,
                    )?;
                    let cfg = TrainConfig {
                        seed: ts,
                        ..tconfig.clone()
                    };
                    let log = train_tree_indexed(&mut tree, rep, &boot, &cfg)?;
                    Ok((tree, log))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let (trees, layer_logs): (Vec<Tree>, Vec<TrainLog>) = trained.into_iter().unzip();
        if l + 1 < specs.len() {
            owned = Some(materialize(&trees, rep, train, options.workers)?);
        }
        layers.push(Layer { spec: *spec, trees });
        logs.push(layer_logs);
    }
    Ok(TrainedForest {
        model: ForestModel::from_layers(layers, d0, c)?,
        logs,
    })
}

/// Next-layer dataset: features of every sample under `trees`.
fn materialize(trees: &[Tree], rep: &Dataset, original: &Dataset, workers: usize) -> Result<Dataset> {
    let samples = with_pool(workers, || {
        rep.samples()
            .par_iter()
            .zip(original.samples().par_iter())
            .map(|(r, o)| Ok(Sample::new(layer_features(trees, &r.features, &o.features)?, o.label)))
            .collect::<Result<Vec<_>>>()
    })?;
    let dim = original.feature_dim() + original.class_count() * trees.len();
    Dataset::new(samples, dim, original.class_count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_blobs, make_xor};
    use crate::tree::Node;

    fn spec(trees: usize, depth: usize) -> LayerSpec {
        LayerSpec {
            tree_count: trees,
            variant: Variant::Budding,
            max_depth: depth,
            filters_per_node: 1,
        }
    }

    fn constant_tree(d: usize, payoff: Vec<f64>) -> Tree {
        let c = payoff.len();
        Tree::from_root(Variant::Budding, d, c, 0, Node::leaf(payoff)).unwrap()
    }

    #[test]
    fn bootstrap_examples() {
        let data = make_blobs(5, 0.1, 0);
        assert!(bootstrap_sample(&data, 0, 1).unwrap().is_empty());
        let one = data.select(&[3]);
        let b = bootstrap_sample(&one, 7, 1).unwrap();
        assert!(b.iter().all(|s| *s == one.samples()[0]));
        assert!(bootstrap_sample(&Dataset::empty(2, 2), 3, 1).is_err());
    }

    #[test]
    fn bootstrap_frequencies_are_uniform() {
        let samples = (0..10).map(|i| Sample::new(vec![i as f64], 0)).collect();
        let data = Dataset::new(samples, 1, 1).unwrap();
        let n = 100_000;
        let boot = bootstrap_sample(&data, n, 99).unwrap();
        let mut counts = [0usize; 10];
        for s in &boot {
            counts[s.features[0] as usize] += 1;
        }
        let sd = (n as f64 * 0.1 * 0.9).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 / 10.0).abs() < 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn tree_distribution_examples() {
        let u = tree_distribution(&constant_tree(1, vec![2.0; 4]), &[0.0]).unwrap();
        assert_eq!(u, vec![0.25; 4]);
        let s = tree_distribution(&constant_tree(1, vec![30.0, -30.0]), &[0.0]).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-12 && s[1] < 1e-12);
    }

    #[test]
    fn layer_feature_shape_and_order() {
        let a = constant_tree(3, vec![1.0, 0.0]);
        let b = constant_tree(3, vec![0.0, 2.0]);
        let x = [0.1, 0.2, 0.3];
        let f = layer_features(std::slice::from_ref(&a), &x, &x).unwrap();
        assert_eq!(f.len(), 5);
        assert_eq!(&f[2..], &x);

        let ab = layer_features(&[a.clone(), b.clone()], &x, &x).unwrap();
        let ba = layer_features(&[b, a], &x, &x).unwrap();
        assert_eq!(&ab[..2], &ba[2..4]);
        assert_eq!(&ab[2..4], &ba[..2]);
        assert_eq!(&ab[4..], &ba[4..]);
    }

    #[test]
    fn averaging_with_tie_break() {
        let layer = Layer {
            spec: spec(2, 0),
            trees: vec![constant_tree(1, vec![40.0, -40.0]), constant_tree(1, vec![-40.0, 40.0])],
        };
        let model = ForestModel::from_layers(vec![layer], 1, 2).unwrap();
        let p = model.predict(&[0.0]).unwrap();
        assert!((p.distribution[0] - 0.5).abs() < 1e-12);
        assert_eq!(p.label, 0);
    }

    #[test]
    fn evaluate_constant_model() {
        let layer = Layer {
            spec: spec(1, 0),
            trees: vec![constant_tree(1, vec![5.0, 0.0, 0.0])],
        };
        let model = ForestModel::from_layers(vec![layer], 1, 3).unwrap();
        let zeros = Dataset::new((0..6).map(|_| Sample::new(vec![0.0], 0)).collect(), 1, 3).unwrap();
        assert_eq!(model.evaluate(&zeros).unwrap().accuracy, 1.0);
        let mixed = Dataset::new((0..9).map(|i| Sample::new(vec![0.0], i % 3)).collect(), 1, 3).unwrap();
        let e = model.evaluate(&mixed).unwrap();
        assert!((e.accuracy - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(
            e.confusion.iter().map(|r| r.iter().sum::<usize>()).collect::<Vec<_>>(),
            vec![3, 3, 3]
        );
        assert!(model.evaluate(&Dataset::empty(1, 3)).is_err());
    }

    #[test]
    fn layer_dimensions_follow_tree_counts() {
        let data = make_xor(20, 0.5, 1);
        let cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let f = train_forest(&data, &[spec(3, 1), spec(2, 1)], &cfg, 5).unwrap();
        assert_eq!(f.model.layers()[0].input_dim(), 2);
        assert_eq!(f.model.layers()[1].input_dim(), 2 + 2 * 3);
        assert_eq!(f.logs[1].len(), 2);
    }

    #[test]
    fn training_is_reproducible_and_worker_independent() {
        let data = make_xor(20, 0.5, 1);
        let cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let specs = [spec(2, 2), spec(2, 1)];
        let a = train_forest(&data, &specs, &cfg, 5).unwrap().model;
        let b = train_forest_with(&data, &specs, &cfg, 5, ForestOptions { workers: 3 })
            .unwrap()
            .model;
        assert_eq!(a, b);
    }

    #[test]
    fn mismatched_layers_are_rejected() {
        let layer = Layer {
            spec: spec(1, 0),
            trees: vec![constant_tree(2, vec![0.0, 0.0])],
        };
        assert!(ForestModel::from_layers(vec![layer.clone()], 3, 2).is_err());
        assert!(ForestModel::from_layers(vec![layer.clone(), layer], 2, 2).is_err());
        assert!(train_forest(&make_blobs(3, 0.1, 0), &[], &TrainConfig::default(), 0).is_err());
    }
}
