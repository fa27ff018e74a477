//! Analytic gradients of softmax cross-entropy through a tree, and the
//! central-difference oracle used to check them.
//!
//! Backpropagation runs in two traversals. A forward pass caches every node's
//! output `y_m`, its child blend, the selected filters and their gate values.
//! A top-down pass then hands each node its upstream vector `u_m = ∂L/∂y_m`:
//!
//! ```text
//! ∂L/∂ρ_m = γ_m u_m                      (u_m at structural leaves)
//! ∂L/∂c_m = γ_m (1 - γ_m) u_mᵀ(ρ_m - blend_m)
//! ∂L/∂s_g = (1 - γ_m) g (1 - g) u_mᵀ(y_l - y_r)   budding, soft (γ = 0)
//! ∂L/∂s_g = (1 - γ_m) g (1 - g) u_mᵀ y_l          distributed
//! ∂L/∂s_h = (1 - γ_m) h (1 - h) u_mᵀ y_r          distributed
//! u_l = (1 - γ_m) g u_m,  u_r = (1 - γ_m) h u_m   (h = 1 - g unless distributed)
//! ```
//!
//! Gate pre-activation gradients reach only the selected filter of each bank.

use super::dd::{self, Dd};
use super::loss::cross_entropy;
use crate::error::{check_dim, Error, Result};
use crate::tree::{select_filter, sigmoid, Node, ParamFamily, Tree, Variant};

/// One gradient slot per trainable scalar, in [`Tree::param_layout`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct GradBuffer {
    values: Vec<f64>,
}

impl GradBuffer {
    pub fn zeros(len: usize) -> Self {
        GradBuffer { values: vec![0.0; len] }
    }

    pub fn zeros_like(tree: &Tree) -> Self {
        Self::zeros(tree.count_parameters())
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        GradBuffer { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn zero(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn accumulate(&mut self, other: &GradBuffer) -> Result<()> {
        self.check_len(other.len())?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub(crate) fn check_len(&self, expected: usize) -> Result<()> {
        if self.values.len() == expected {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected,
                found: self.values.len(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct NodeCache {
    g: f64,
    h: f64,
    gamma: f64,
    selected: usize,
    selected2: usize,
    right: usize,
}

/// Scratch space reused across samples. Sized lazily to the tree at hand.
#[derive(Debug, Default)]
pub struct Workspace {
    y: Vec<f64>,
    blend: Vec<f64>,
    upstream: Vec<f64>,
    cache: Vec<NodeCache>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn prepare(&mut self, nodes: usize, classes: usize) {
        let n = nodes * classes;
        self.y.resize(n, 0.0);
        self.blend.resize(n, 0.0);
        self.upstream.resize(n, 0.0);
        self.cache.resize(nodes, NodeCache::default());
    }
}

struct Pass<'a> {
    variant: Variant,
    x: &'a [f64],
    d: usize,
    c: usize,
}

impl Pass<'_> {
    /// Caches outputs for the subtree rooted at preorder index `idx`; returns
    /// the next free index.
    fn forward(&self, node: &crate::tree::Node, idx: usize, ws: &mut Workspace) -> usize {
        let c = self.c;
        let Some((left, right)) = node.children() else {
            ws.y[idx * c..(idx + 1) * c].copy_from_slice(&node.payoff);
            return idx + 1;
        };
        let (s, selected) = select_filter(&node.gating, self.x);
        let g = sigmoid(s);
        let (h, selected2) = match &node.gating2 {
            Some(bank) => {
                let (s2, k2) = select_filter(bank, self.x);
                (sigmoid(s2), k2)
            }
            None => (1.0 - g, 0),
        };
        let li = idx + 1;
        let ri = self.forward(left, li, ws);
        let end = self.forward(right, ri, ws);
        let gamma = if self.variant.has_leafness() {
            sigmoid(node.leafness_logit)
        } else {
            0.0
        };
        for k in 0..c {
            let b = g * ws.y[li * c + k] + h * ws.y[ri * c + k];
            ws.blend[idx * c + k] = b;
            ws.y[idx * c + k] = if self.variant.has_leafness() {
                (1.0 - gamma) * b + gamma * node.payoff[k]
            } else {
                b
            };
        }
        ws.cache[idx] = NodeCache {
            g,
            h,
            gamma,
            selected,
            selected2,
            right: ri,
        };
        end
    }

    /// Distributes `ws.upstream[idx]` into `grad`, starting at `offset`
    /// (the node's first parameter slot). Returns the offset past the subtree.
    fn backward(
        &self,
        node: &crate::tree::Node,
        idx: usize,
        ws: &mut Workspace,
        grad: &mut [f64],
        mut offset: usize,
    ) -> usize {
        let (c, d) = (self.c, self.d);
        let Some((left, right)) = node.children() else {
            for k in 0..c {
                grad[offset + k] += ws.upstream[idx * c + k];
            }
            return offset + c;
        };
        let nc = ws.cache[idx];
        let li = idx + 1;
        let ri = nc.right;
        let keep = 1.0 - nc.gamma;
        let u = idx * c;

        let mut u_dot_l = 0.0;
        let mut u_dot_r = 0.0;
        let mut u_dot_leaf = 0.0;
        for k in 0..c {
            let uk = ws.upstream[u + k];
            u_dot_l += uk * ws.y[li * c + k];
            u_dot_r += uk * ws.y[ri * c + k];
            u_dot_leaf += uk * (node.payoff[k] - ws.blend[u + k]);
        }

        let bank_len = node.gating.len() * (d + 1);
        let ds_g = match self.variant {
            Variant::Distributed => keep * nc.g * (1.0 - nc.g) * u_dot_l,
            _ => keep * nc.g * (1.0 - nc.g) * (u_dot_l - u_dot_r),
        };
        add_filter_grad(&mut grad[offset + nc.selected * (d + 1)..][..d + 1], self.x, ds_g);
        offset += bank_len;

        if node.gating2.is_some() {
            let ds_h = keep * nc.h * (1.0 - nc.h) * u_dot_r;
            add_filter_grad(&mut grad[offset + nc.selected2 * (d + 1)..][..d + 1], self.x, ds_h);
            offset += bank_len;
        }

        if self.variant.has_leafness() {
            grad[offset] += nc.gamma * (1.0 - nc.gamma) * u_dot_leaf;
            offset += 1;
            for k in 0..c {
                grad[offset + k] += nc.gamma * ws.upstream[u + k];
            }
            offset += c;
        }

        for k in 0..c {
            let uk = ws.upstream[u + k];
            ws.upstream[li * c + k] = keep * nc.g * uk;
            ws.upstream[ri * c + k] = keep * nc.h * uk;
        }
        let offset = self.backward(left, li, ws, grad, offset);
        self.backward(right, ri, ws, grad, offset)
    }
}

#[inline]
fn add_filter_grad(slot: &mut [f64], x: &[f64], ds: f64) {
    let (w, b) = slot.split_at_mut(x.len());
    for (gw, xi) in w.iter_mut().zip(x) {
        *gw += ds * xi;
    }
    b[0] += ds;
}

/// Adds `scale · ∂L/∂θ` for one sample into `grad` and returns the sample's
/// loss. The caller validates dimensions and label.
pub(crate) fn accumulate_gradient(
    tree: &Tree,
    x: &[f64],
    label: usize,
    scale: f64,
    grad: &mut [f64],
    ws: &mut Workspace,
) -> f64 {
    let c = tree.class_count();
    let pass = Pass {
        variant: tree.variant(),
        x,
        d: tree.input_dim(),
        c,
    };
    ws.prepare(tree.node_count(), c);
    pass.forward(tree.root(), 0, ws);
    let root = &ws.y[..c];
    let loss = cross_entropy(root, label);
    let max = root.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = root.iter().map(|s| (s - max).exp()).sum();
    for k in 0..c {
        let p = (ws.y[k] - max).exp() / total;
        let onehot = if k == label { 1.0 } else { 0.0 };
        ws.upstream[k] = scale * (p - onehot);
    }
    pass.backward(tree.root(), 0, ws, grad, 0);
    loss
}

pub(crate) fn check_sample(tree: &Tree, x: &[f64], label: usize) -> Result<()> {
    check_dim(tree.input_dim(), x.len())?;
    if label >= tree.class_count() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: tree.class_count(),
        });
    }
    Ok(())
}

/// Loss and exact gradient of softmax cross-entropy for one sample.
/// The tree is not modified.
pub fn backward(tree: &Tree, x: &[f64], label: usize) -> Result<(f64, GradBuffer)> {
    check_sample(tree, x, label)?;
    let mut grad = GradBuffer::zeros_like(tree);
    let mut ws = Workspace::new();
    let loss = accumulate_gradient(tree, x, label, 1.0, &mut grad.values, &mut ws);
    Ok((loss, grad))
}

/// Central differences `(L(θ + h) - L(θ - h)) / 2h`, one parameter at a time.
///
/// Each loss is a full forward pass over the tree, evaluated in double-double
/// arithmetic from the flat parameter vector with `θ ± h` formed exactly. The
/// tree itself is never modified, and no code is shared with [`backward`].
pub fn finite_difference_grad(tree: &Tree, x: &[f64], label: usize, step: f64) -> Result<GradBuffer> {
    check_sample(tree, x, label)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!(
            "finite-difference step {step} must be positive"
        )));
    }
    let base: Vec<Dd> = tree.params().into_iter().map(Dd::new).collect();
    let mut params = base.clone();
    let h = Dd::new(step);
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        params[i] = base[i] + h;
        let plus = reference_loss(tree, &params, x, label);
        params[i] = base[i] - h;
        let minus = reference_loss(tree, &params, x, label);
        params[i] = base[i];
        out.push(((plus - minus) / (h + h)).to_f64());
    }
    Ok(GradBuffer::from_values(out))
}

fn reference_loss(tree: &Tree, params: &[Dd], x: &[f64], label: usize) -> Dd {
    let mut cursor = 0;
    let scores = reference_eval(tree.root(), tree.variant(), tree.class_count(), x, params, &mut cursor);
    debug_assert_eq!(cursor, params.len());
    dd::cross_entropy(&scores, label)
}

/// Straight recursive evaluation of a node, reading its parameters from
/// `params` in layout order.
fn reference_eval(node: &Node, variant: Variant, c: usize, x: &[f64], params: &[Dd], cursor: &mut usize) -> Vec<Dd> {
    let mut next = |n: usize| {
        let s = &params[*cursor..*cursor + n];
        *cursor += n;
        s
    };
    let Some((left, right)) = node.children() else {
        return next(c).to_vec();
    };
    let mut bank_gate = |filters: usize| {
        let mut best: Option<Dd> = None;
        for _ in 0..filters {
            let fp = next(x.len() + 1);
            let score = x
                .iter()
                .zip(fp)
                .fold(fp[x.len()], |acc, (&xi, &w)| acc + w * Dd::new(xi));
            if best.is_none_or(|b| score > b) {
                best = Some(score);
            }
        }
        dd::sigmoid(best.expect("at least one filter"))
    };
    let g = bank_gate(node.gating.len());
    let h = match &node.gating2 {
        Some(bank) => bank_gate(bank.len()),
        None => Dd::ONE - g,
    };
    let leaf_part = variant.has_leafness().then(|| {
        let gamma = dd::sigmoid(next(1)[0]);
        (gamma, next(c).to_vec())
    });
    let yl = reference_eval(left, variant, c, x, params, cursor);
    let yr = reference_eval(right, variant, c, x, params, cursor);
    let blend = yl.iter().zip(&yr).map(|(&l, &r)| g * l + h * r);
    match leaf_part {
        None => blend.collect(),
        Some((gamma, rho)) => blend.zip(rho).map(|(b, p)| (Dd::ONE - gamma) * b + gamma * p).collect(),
    }
}

/// Relative discrepancy `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Largest relative error between two gradients, overall and per family.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradientDiscrepancy {
    pub overall: f64,
    pub gating: f64,
    pub leafness: f64,
    pub payoff: f64,
}

impl GradientDiscrepancy {
    pub fn merge(self, o: GradientDiscrepancy) -> GradientDiscrepancy {
        GradientDiscrepancy {
            overall: self.overall.max(o.overall),
            gating: self.gating.max(o.gating),
            leafness: self.leafness.max(o.leafness),
            payoff: self.payoff.max(o.payoff),
        }
    }
}

pub fn compare_gradients(
    tree: &Tree,
    analytic: &GradBuffer,
    numeric: &GradBuffer,
    floor: f64,
) -> Result<GradientDiscrepancy> {
    let layout = tree.param_layout();
    analytic.check_len(layout.len())?;
    numeric.check_len(layout.len())?;
    let mut out = GradientDiscrepancy::default();
    for ((slot, a), n) in layout.iter().zip(analytic.values()).zip(numeric.values()) {
        let e = relative_error(*a, *n, floor);
        out.overall = out.overall.max(e);
        let family = match slot.family {
            ParamFamily::Gating => &mut out.gating,
            ParamFamily::Leafness => &mut out.leafness,
            ParamFamily::Payoff => &mut out.payoff,
        };
        *family = family.max(e);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::softmax;
    use crate::tree::{GatingFilter, Node};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn randomize(tree: &mut Tree, rng: &mut ChaCha8Rng) {
        tree.for_each_param_mut(|_, v| *v = rng.random_range(-1.5..1.5));
    }

    #[test]
    fn leaf_gradient_is_softmax_minus_onehot() {
        let t = Tree::from_root(Variant::Budding, 2, 3, 0, Node::leaf(vec![0.5, -1.0, 2.0])).unwrap();
        let (l, g) = backward(&t, &[0.3, 0.1], 2).unwrap();
        let mut expected = softmax(&[0.5, -1.0, 2.0]);
        expected[2] -= 1.0;
        assert_eq!(g.values(), expected.as_slice());
        assert!((l - crate::training::loss(&[0.5, -1.0, 2.0], 2).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn matches_finite_differences_on_random_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for variant in [Variant::Soft, Variant::Budding, Variant::Distributed] {
            for _ in 0..5 {
                let mut t = Tree::new_complete(variant, 6, 3, 3, 2, &mut rng).unwrap();
                randomize(&mut t, &mut rng);
                let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
                let (_, analytic) = backward(&t, &x, 1).unwrap();
                let numeric = finite_difference_grad(&t, &x, 1, 1e-5).unwrap();
                let err = compare_gradients(&t, &analytic, &numeric, 1e-8).unwrap();
                assert!(err.overall < 1e-6, "{variant}: {err:?}");
            }
        }
    }

    #[test]
    fn backward_leaves_tree_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = Tree::new_complete(Variant::Distributed, 4, 2, 2, 3, &mut rng).unwrap();
        let before = t.clone();
        backward(&t, &[0.1, 0.2, 0.3, 0.4], 0).unwrap();
        assert_eq!(t, before);
    }

    #[test]
    fn gradient_only_reaches_selected_filter() {
        // filter 1 wins for x = 1
        let bank = vec![GatingFilter::new(vec![0.0], -1.0), GatingFilter::new(vec![1.0], 0.0)];
        let root = Node::internal(
            bank,
            None,
            0.0,
            vec![0.0, 0.0],
            Node::leaf(vec![1.0, 0.0]),
            Node::leaf(vec![0.0, 1.0]),
        );
        let t = Tree::from_root(Variant::Budding, 1, 2, 1, root).unwrap();
        let (_, g) = backward(&t, &[1.0], 0).unwrap();
        assert_eq!(&g.values()[..2], &[0.0, 0.0]);
        assert!(g.values()[2] != 0.0 && g.values()[3] != 0.0);
    }

    #[test]
    fn errors() {
        let t = Tree::single_leaf(Variant::Budding, 2, 2, 0).unwrap();
        assert!(matches!(backward(&t, &[0.0], 0), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(
            backward(&t, &[0.0, 0.0], 2),
            Err(Error::LabelOutOfRange { .. })
        ));
        assert!(finite_difference_grad(&t, &[0.0, 0.0], 0, 0.0).is_err());
    }

    #[test]
    fn buffer_shape_checks() {
        let mut a = GradBuffer::zeros(3);
        assert!(a.accumulate(&GradBuffer::zeros(2)).is_err());
        a.accumulate(&GradBuffer::from_values(vec![1.0, 2.0, 3.0])).unwrap();
        a.scale(2.0);
        assert_eq!(a.values(), &[2.0, 4.0, 6.0]);
        a.zero();
        assert_eq!(a.values(), &[0.0; 3]);
    }
}
