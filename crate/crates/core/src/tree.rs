//! Soft decision trees: data model, forward passes and structural utilities.
//!
//! A tree is a full binary structure of [`Node`]s. Every internal node routes
//! its input to both children through a sigmoid gate; the three [`Variant`]s
//! differ only in how the children's outputs are blended:
//!
//! * `Soft`: `y = g * y_left + (1 - g) * y_right`, leaves emit their payoff.
//! * `Budding`: `y = (1 - γ) [g * y_left + (1 - g) * y_right] + γ ρ`, where the
//!   leafness `γ = σ(c)` is learned per node.
//! * `Distributed`: like budding, but the right branch is weighted by a second,
//!   independent gate `h` instead of `1 - g`.
//!
//! Each internal node may own several gating filters. The filter with the
//! largest affine score `wᵀx + b` for the current input is selected and its
//! sigmoid becomes the routing probability.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_dim, Error, Result};

/// Deepest tree any constructor or loader will accept. A complete tree of this
/// depth already has more than a billion nodes.
pub const MAX_SUPPORTED_DEPTH: usize = 30;

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Dot product with four independent accumulators. The summation order is
/// fixed, so results are reproducible across runs and platforms.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail: f64 = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// One weight map of a gating function.
#[derive(Debug, Clone, PartialEq)]
pub struct GatingFilter {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl GatingFilter {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        GatingFilter { weights, bias }
    }

    /// Affine similarity `wᵀx + b`. The caller guarantees matching lengths.
    #[inline]
    pub(crate) fn score(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    fn negated(&self) -> Self {
        GatingFilter {
            weights: self.weights.iter().map(|w| -w).collect(),
            bias: -self.bias,
        }
    }
}

/// Routing probability `σ(wᵀx + b)` of a single filter.
pub fn gate(filter: &GatingFilter, x: &[f64]) -> Result<f64> {
    check_dim(filter.weights.len(), x.len())?;
    Ok(sigmoid(filter.score(x)))
}

/// Selects the filter with the largest affine score (lowest index on ties)
/// and returns its routing probability together with the selected index.
pub fn multi_gate(filters: &[GatingFilter], x: &[f64]) -> Result<(f64, usize)> {
    if filters.is_empty() {
        return Err(Error::invalid("multi_gate needs at least one filter"));
    }
    for f in filters {
        check_dim(f.weights.len(), x.len())?;
    }
    let (score, index) = select_filter(filters, x);
    Ok((sigmoid(score), index))
}

/// Unchecked argmax over filter scores. Returns `(score, index)`.
#[inline]
pub(crate) fn select_filter(filters: &[GatingFilter], x: &[f64]) -> (f64, usize) {
    let mut best = filters[0].score(x);
    let mut best_index = 0;
    for (k, f) in filters.iter().enumerate().skip(1) {
        let s = f.score(x);
        if s > best {
            best = s;
            best_index = k;
        }
    }
    (best, best_index)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Soft,
    Budding,
    Distributed,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Soft => "soft",
            Variant::Budding => "budding",
            Variant::Distributed => "distributed",
        }
    }

    /// Number of gating banks an internal node carries.
    pub fn gate_banks(self) -> usize {
        match self {
            Variant::Distributed => 2,
            _ => 1,
        }
    }

    /// Whether internal nodes own a trainable leafness logit and payoff.
    pub fn has_leafness(self) -> bool {
        !matches!(self, Variant::Soft)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(Variant::Soft),
            "budding" => Ok(Variant::Budding),
            "distributed" => Ok(Variant::Distributed),
            other => Err(Error::invalid(format!(
                "unknown tree variant `{other}` (expected soft, budding or distributed)"
            ))),
        }
    }
}

/// A tree node. Internal nodes own gating filters and two children; leaves
/// own only a payoff.
///
/// A node without children is a fixed leaf: it behaves as if its leafness
/// were exactly 1. Its `leafness_logit` is carried along but never read by a
/// forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub gating: Vec<GatingFilter>,
    /// Second, independent filter bank (the `h` gate). Present only on
    /// internal nodes of distributed trees.
    pub gating2: Option<Vec<GatingFilter>>,
    pub leafness_logit: f64,
    pub payoff: Vec<f64>,
    pub children: Option<Box<(Node, Node)>>,
}

impl Node {
    pub fn leaf(payoff: Vec<f64>) -> Self {
        Node {
            gating: Vec::new(),
            gating2: None,
            leafness_logit: 0.0,
            payoff,
            children: None,
        }
    }

    pub fn internal(
        gating: Vec<GatingFilter>,
        gating2: Option<Vec<GatingFilter>>,
        leafness_logit: f64,
        payoff: Vec<f64>,
        left: Node,
        right: Node,
    ) -> Self {
        Node {
            gating,
            gating2,
            leafness_logit,
            payoff,
            children: Some(Box::new((left, right))),
        }
    }

    #[inline]
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    /// Effective leafness: exactly 1 at leaves, `σ(c)` elsewhere.
    pub fn leafness(&self) -> f64 {
        if self.is_leaf() {
            1.0
        } else {
            sigmoid(self.leafness_logit)
        }
    }

    pub fn children(&self) -> Option<(&Node, &Node)> {
        self.children.as_deref().map(|(l, r)| (l, r))
    }

    pub fn children_mut(&mut self) -> Option<(&mut Node, &mut Node)> {
        self.children.as_deref_mut().map(|(l, r)| (l, r))
    }

    /// Height of the subtree rooted here (a leaf has height 0).
    pub fn height(&self) -> usize {
        match self.children() {
            None => 0,
            Some((l, r)) => 1 + l.height().max(r.height()),
        }
    }

    pub fn node_count(&self) -> usize {
        match self.children() {
            None => 1,
            Some((l, r)) => 1 + l.node_count() + r.node_count(),
        }
    }

    /// Visits every node in depth-first preorder with its depth.
    pub fn visit_preorder<'a>(&'a self, f: &mut impl FnMut(&'a Node, usize)) {
        fn go<'a>(node: &'a Node, depth: usize, f: &mut impl FnMut(&'a Node, usize)) {
            f(node, depth);
            if let Some((l, r)) = node.children() {
                go(l, depth + 1, f);
                go(r, depth + 1, f);
            }
        }
        go(self, 0, f);
    }

    fn visit_preorder_mut(&mut self, f: &mut impl FnMut(&mut Node)) {
        f(self);
        if let Some((l, r)) = self.children_mut() {
            l.visit_preorder_mut(f);
            r.visit_preorder_mut(f);
        }
    }
}

/// Unnormalized class scores produced by a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeOutput {
    pub scores: Vec<f64>,
}

/// Which group a trainable scalar belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamFamily {
    Gating,
    Leafness,
    Payoff,
}

impl ParamFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamFamily::Gating => "gating",
            ParamFamily::Leafness => "leafness",
            ParamFamily::Payoff => "payoff",
        }
    }
}

/// Location of one trainable scalar in the flat parameter order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamSlot {
    /// Preorder index of the owning node.
    pub node: usize,
    pub family: ParamFamily,
}

/// Trainable scalar counts broken down by family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParamCounts {
    pub gating: usize,
    pub leafness: usize,
    pub payoff: usize,
}

impl ParamCounts {
    pub fn total(&self) -> usize {
        self.gating + self.leafness + self.payoff
    }
}

impl std::ops::Add for ParamCounts {
    type Output = ParamCounts;

    fn add(self, o: ParamCounts) -> ParamCounts {
        ParamCounts {
            gating: self.gating + o.gating,
            leafness: self.leafness + o.leafness,
            payoff: self.payoff + o.payoff,
        }
    }
}

impl std::iter::Sum for ParamCounts {
    fn sum<I: Iterator<Item = ParamCounts>>(iter: I) -> Self {
        iter.fold(ParamCounts::default(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    root: Node,
    variant: Variant,
    input_dim: usize,
    class_count: usize,
    max_depth: usize,
}

impl Tree {
    /// Wraps a hand-built node structure, checking every structural invariant.
    pub fn from_root(
        variant: Variant,
        input_dim: usize,
        class_count: usize,
        max_depth: usize,
        root: Node,
    ) -> Result<Self> {
        let tree = Tree {
            root,
            variant,
            input_dim,
            class_count,
            max_depth,
        };
        tree.validate()?;
        Ok(tree)
    }

    /// Allocates a complete tree of depth `max_depth` with `filters` gating
    /// filters per internal node. Gating weights are drawn i.i.d. from
    /// `N(0, 1/d)`; biases, payoffs and leafness logits start at zero.
    pub fn new_complete<R: Rng + ?Sized>(
        variant: Variant,
        input_dim: usize,
        class_count: usize,
        max_depth: usize,
        filters: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim == 0 || class_count == 0 {
            return Err(Error::invalid("input dimension and class count must be positive"));
        }
        if filters == 0 {
            return Err(Error::invalid("filters per node must be at least 1"));
        }
        if max_depth > MAX_SUPPORTED_DEPTH {
            return Err(Error::invalid(format!(
                "max depth {max_depth} exceeds supported maximum {MAX_SUPPORTED_DEPTH}"
            )));
        }
        let std_dev = 1.0 / (input_dim as f64).sqrt();
        let normal = Normal::new(0.0, std_dev).expect("finite positive std dev");
        let root = build_complete(variant, input_dim, class_count, max_depth, filters, &normal, rng);
        Ok(Tree {
            root,
            variant,
            input_dim,
            class_count,
            max_depth,
        })
    }

    /// A single-leaf tree with zero payoff.
    pub fn single_leaf(variant: Variant, input_dim: usize, class_count: usize, max_depth: usize) -> Result<Self> {
        Tree::from_root(
            variant,
            input_dim,
            class_count,
            max_depth,
            Node::leaf(vec![0.0; class_count]),
        )
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Mutable access for direct parameter surgery. The caller must keep the
    /// structural invariants intact; [`Tree::validate`] re-checks them.
    pub fn root_mut(&mut self) -> &mut Node {
        &mut self.root
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Actual height of the structure, `<= max_depth`.
    pub fn depth(&self) -> usize {
        self.root.height()
    }

    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }

    /// Filters per internal node, or `None` for a single-leaf tree.
    pub fn filters_per_node(&self) -> Option<usize> {
        let mut found = None;
        self.root.visit_preorder(&mut |n, _| {
            if found.is_none() && !n.is_leaf() {
                found = Some(n.gating.len());
            }
        });
        found
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.class_count == 0 {
            return Err(Error::invalid("input dimension and class count must be positive"));
        }
        if self.max_depth > MAX_SUPPORTED_DEPTH {
            return Err(Error::invalid(format!(
                "max depth {} exceeds supported maximum {MAX_SUPPORTED_DEPTH}",
                self.max_depth
            )));
        }
        let mut problem: Option<String> = None;
        let mut filters: Option<usize> = None;
        self.root.visit_preorder(&mut |n, depth| {
            if problem.is_some() {
                return;
            }
            if n.payoff.len() != self.class_count {
                problem = Some(format!(
                    "payoff length {} at depth {depth} differs from class count {}",
                    n.payoff.len(),
                    self.class_count
                ));
                return;
            }
            if depth > self.max_depth {
                problem = Some(format!("node at depth {depth} exceeds max depth {}", self.max_depth));
                return;
            }
            if n.is_leaf() {
                if !n.gating.is_empty() || n.gating2.is_some() {
                    problem = Some(format!("leaf at depth {depth} carries gating filters"));
                }
                return;
            }
            if n.gating.is_empty() {
                problem = Some(format!("internal node at depth {depth} has no gating filter"));
                return;
            }
            if *filters.get_or_insert(n.gating.len()) != n.gating.len() {
                problem = Some("internal nodes disagree on filters per node".into());
                return;
            }
            let bad_dim = |bank: &[GatingFilter]| bank.iter().any(|f| f.weights.len() != self.input_dim);
            if bad_dim(&n.gating) {
                problem = Some(format!(
                    "gating filter length differs from input dimension {}",
                    self.input_dim
                ));
                return;
            }
            match (&n.gating2, self.variant) {
                (Some(bank), Variant::Distributed) => {
                    if bank.len() != n.gating.len() {
                        problem = Some("second gating bank length differs from the first".into());
                    } else if bad_dim(bank) {
                        problem = Some(format!(
                            "second gating filter length differs from input dimension {}",
                            self.input_dim
                        ));
                    }
                }
                (None, Variant::Distributed) => {
                    problem = Some(format!(
                        "distributed internal node at depth {depth} lacks a second gating bank"
                    ))
                }
                (Some(_), _) => problem = Some(format!("{} tree node carries a second gating bank", self.variant)),
                (None, _) => {}
            }
        });
        match problem {
            Some(msg) => Err(Error::invalid(msg)),
            None => Ok(()),
        }
    }

    /// Forward pass under the tree's own variant.
    pub fn forward(&self, x: &[f64]) -> Result<TreeOutput> {
        check_dim(self.input_dim, x.len())?;
        let mut scores = vec![0.0; self.class_count];
        eval_node(&self.root, self.variant, x, &mut scores);
        Ok(TreeOutput { scores })
    }

    /// Exact count of trainable scalars.
    pub fn count_parameters(&self) -> usize {
        self.parameter_counts().total()
    }

    pub fn parameter_counts(&self) -> ParamCounts {
        let mut counts = ParamCounts::default();
        self.root.visit_preorder(&mut |n, _| {
            let (g, l, p) = node_param_counts(n, self.variant, self.input_dim);
            counts.gating += g;
            counts.leafness += l;
            counts.payoff += p;
        });
        counts
    }

    /// Family and owning node of every trainable scalar, in flat order.
    ///
    /// Per node in preorder: each filter of the first bank (`d` weights then
    /// bias), the same for the second bank, the leafness logit, the payoff.
    /// Soft trees have no leafness and train payoffs only at leaves.
    pub fn param_layout(&self) -> Vec<ParamSlot> {
        let mut slots = Vec::with_capacity(self.count_parameters());
        let mut index = 0;
        self.root.visit_preorder(&mut |n, _| {
            let (g, l, p) = node_param_counts(n, self.variant, self.input_dim);
            let family_run = [
                (ParamFamily::Gating, g),
                (ParamFamily::Leafness, l),
                (ParamFamily::Payoff, p),
            ];
            for (family, count) in family_run {
                slots.extend(std::iter::repeat_n(ParamSlot { node: index, family }, count));
            }
            index += 1;
        });
        slots
    }

    /// Copies all trainable scalars out in flat order.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.count_parameters());
        let variant = self.variant;
        self.root.visit_preorder(&mut |n, _| {
            if let Some((_, _)) = n.children() {
                for f in n.gating.iter().chain(n.gating2.iter().flatten()) {
                    out.extend_from_slice(&f.weights);
                    out.push(f.bias);
                }
                if variant.has_leafness() {
                    out.push(n.leafness_logit);
                    out.extend_from_slice(&n.payoff);
                }
            } else {
                out.extend_from_slice(&n.payoff);
            }
        });
        out
    }

    /// Applies `f` to every trainable scalar in flat order.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(usize, &mut f64)) {
        let variant = self.variant;
        let mut i = 0;
        let mut apply = |v: &mut f64| {
            f(i, v);
            i += 1;
        };
        self.root.visit_preorder_mut(&mut |n| {
            if n.is_leaf() {
                n.payoff.iter_mut().for_each(&mut apply);
                return;
            }
            for filt in n.gating.iter_mut().chain(n.gating2.iter_mut().flatten()) {
                filt.weights.iter_mut().for_each(&mut apply);
                apply(&mut filt.bias);
            }
            if variant.has_leafness() {
                apply(&mut n.leafness_logit);
                n.payoff.iter_mut().for_each(&mut apply);
            }
        });
    }

    /// Overwrites all trainable scalars from a flat slice.
    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        let expected = self.count_parameters();
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                found: values.len(),
            });
        }
        self.for_each_param_mut(|i, v| *v = values[i]);
        Ok(())
    }

    /// Returns a copy in which every node with leafness `>= threshold` has
    /// become a leaf and lost its subtree.
    pub fn prune_hard(&self, threshold: f64) -> Result<Tree> {
        check_prune_threshold(threshold)?;
        let mut pruned = self.clone();
        prune_node(&mut pruned.root, threshold);
        Ok(pruned)
    }

    /// Converts a budding tree into a distributed one whose second bank is
    /// the negation of the first, so that `h = 1 - g` for every input.
    pub fn to_distributed_mirror(&self) -> Result<Tree> {
        if self.variant != Variant::Budding {
            return Err(Error::invalid("mirror construction starts from a budding tree"));
        }
        let mut out = self.clone();
        out.variant = Variant::Distributed;
        out.root.visit_preorder_mut(&mut |n| {
            if !n.is_leaf() {
                n.gating2 = Some(n.gating.iter().map(GatingFilter::negated).collect());
            }
        });
        Ok(out)
    }

    /// Same structure and parameters, reinterpreted under another variant.
    /// Converting to or from distributed adds or drops the second bank.
    pub fn with_variant(&self, variant: Variant) -> Result<Tree> {
        if variant == Variant::Distributed && self.variant != Variant::Distributed {
            return self.to_distributed_mirror();
        }
        let mut out = self.clone();
        out.variant = variant;
        out.root.visit_preorder_mut(&mut |n| n.gating2 = None);
        out.validate()?;
        Ok(out)
    }

    /// Follows a root-to-node path (`false` = left, `true` = right).
    pub fn node_at(&self, path: &[bool]) -> Option<&Node> {
        let mut node = &self.root;
        for &right in path {
            let (l, r) = node.children()?;
            node = if right { r } else { l };
        }
        Some(node)
    }

    pub fn node_at_mut(&mut self, path: &[bool]) -> Option<&mut Node> {
        let mut node = &mut self.root;
        for &right in path {
            let (l, r) = node.children_mut()?;
            node = if right { r } else { l };
        }
        Some(node)
    }

    /// Preorder index of the node at `path`, if it exists.
    pub fn preorder_index(&self, path: &[bool]) -> Option<usize> {
        let mut node = &self.root;
        let mut index = 0;
        for &right in path {
            let (l, r) = node.children()?;
            if right {
                index += 1 + l.node_count();
                node = r;
            } else {
                index += 1;
                node = l;
            }
        }
        Some(index)
    }
}

pub(crate) fn check_prune_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.5 && threshold <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("prune threshold {threshold} outside (0.5, 1]")))
    }
}

/// Trainable scalars owned directly by `node`: (gating, leafness, payoff).
pub(crate) fn node_param_counts(node: &Node, variant: Variant, input_dim: usize) -> (usize, usize, usize) {
    if node.is_leaf() {
        return (0, 0, node.payoff.len());
    }
    let banks = node.gating.len() + node.gating2.as_ref().map_or(0, Vec::len);
    let gating = banks * (input_dim + 1);
    if variant.has_leafness() {
        (gating, 1, node.payoff.len())
    } else {
        (gating, 0, 0)
    }
}

fn prune_node(node: &mut Node, threshold: f64) {
    if node.is_leaf() {
        return;
    }
    if node.leafness() >= threshold {
        node.children = None;
        node.gating.clear();
        node.gating2 = None;
        return;
    }
    if let Some((l, r)) = node.children_mut() {
        prune_node(l, threshold);
        prune_node(r, threshold);
    }
}

fn build_complete<R: Rng + ?Sized>(
    variant: Variant,
    d: usize,
    c: usize,
    remaining: usize,
    filters: usize,
    normal: &Normal<f64>,
    rng: &mut R,
) -> Node {
    if remaining == 0 {
        return Node::leaf(vec![0.0; c]);
    }
    let mut bank = || -> Vec<GatingFilter> {
        (0..filters)
            .map(|_| GatingFilter::new((0..d).map(|_| normal.sample(rng)).collect(), 0.0))
            .collect()
    };
    let gating = bank();
    let gating2 = (variant == Variant::Distributed).then(&mut bank);
    let left = build_complete(variant, d, c, remaining - 1, filters, normal, rng);
    let right = build_complete(variant, d, c, remaining - 1, filters, normal, rng);
    Node::internal(gating, gating2, 0.0, vec![0.0; c], left, right)
}

/// Evaluates `node` on `x`, writing class scores into `out`.
fn eval_node(node: &Node, variant: Variant, x: &[f64], out: &mut [f64]) {
    let Some((left, right)) = node.children() else {
        out.copy_from_slice(&node.payoff);
        return;
    };
    let (s, _) = select_filter(&node.gating, x);
    let g = sigmoid(s);
    let h = match &node.gating2 {
        Some(bank) => sigmoid(select_filter(bank, x).0),
        None => 1.0 - g,
    };
    let mut yl = vec![0.0; out.len()];
    eval_node(left, variant, x, &mut yl);
    eval_node(right, variant, x, out);
    match variant {
        Variant::Soft => {
            for (o, l) in out.iter_mut().zip(&yl) {
                *o = g * l + (1.0 - g) * *o;
            }
        }
        Variant::Budding | Variant::Distributed => {
            let gamma = sigmoid(node.leafness_logit);
            for ((o, l), rho) in out.iter_mut().zip(&yl).zip(&node.payoff) {
                *o = (1.0 - gamma) * (g * l + h * *o) + gamma * rho;
            }
        }
    }
}

fn require_variant(tree: &Tree, want: Variant) -> Result<()> {
    if tree.variant == want {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "expected a {want} tree, got a {} tree",
            tree.variant
        )))
    }
}

/// Plain soft-tree evaluation. Leafness is ignored.
pub fn forward_soft(tree: &Tree, x: &[f64]) -> Result<TreeOutput> {
    require_variant(tree, Variant::Soft)?;
    tree.forward(x)
}

pub fn forward_budding(tree: &Tree, x: &[f64]) -> Result<TreeOutput> {
    require_variant(tree, Variant::Budding)?;
    tree.forward(x)
}

pub fn forward_distributed(tree: &Tree, x: &[f64]) -> Result<TreeOutput> {
    require_variant(tree, Variant::Distributed)?;
    tree.forward(x)
}
