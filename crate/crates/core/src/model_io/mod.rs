//! Binary model files and DOT export.
//!
//! Model file layout, all integers little-endian `u32` unless noted:
//!
//! ```text
//! magic        8 bytes  "BFORESTm"
//! version      u32      1
//! input_dim    u32
//! class_count  u32
//! layer_count  u32
//! per layer:
//!   tree_count u32, variant u8 (0 soft, 1 budding, 2 distributed),
//!   max_depth u32, filters_per_node u32
//!   per tree, nodes in depth-first preorder:
//!     kind u8 (0 leaf, 1 internal), filter count u32 (0 for leaves),
//!     first bank:  filters × (input_dim weights, bias) as f64
//!     second bank: same shape, internal nodes of distributed trees only
//!     leafness logit f64, payoff class_count × f64
//! ```
//!
//! Floats are stored as raw IEEE-754 bits, so a round trip is bit-exact.
//! Nothing may follow the last node.

mod dot;

pub use dot::{export_dot, render_dot};

use std::io::{Read, Write};

use thiserror::Error;

use crate::error::Result;
use crate::forest::{layer_input_dim, ForestModel, Layer, LayerSpec};
use crate::tree::{GatingFilter, Node, Tree, Variant, MAX_SUPPORTED_DEPTH};

pub const MODEL_MAGIC: &[u8; 8] = b"BFORESTm";
pub const MODEL_VERSION: u32 = 1;

const KIND_LEAF: u8 = 0;
const KIND_INTERNAL: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("model file truncated at byte {0}")]
    Truncated(usize),
    #[error("model file has {0} trailing bytes")]
    TrailingBytes(usize),
    #[error("unknown tree variant tag {0}")]
    UnknownVariant(u8),
    #[error("unknown node kind {0} at byte {1}")]
    UnknownNodeKind(u8, usize),
    #[error("invalid model: {0}")]
    Invalid(String),
}

fn variant_tag(v: Variant) -> u8 {
    match v {
        Variant::Soft => 0,
        Variant::Budding => 1,
        Variant::Distributed => 2,
    }
}

fn variant_from_tag(tag: u8) -> Result<Variant, FormatError> {
    match tag {
        0 => Ok(Variant::Soft),
        1 => Ok(Variant::Budding),
        2 => Ok(Variant::Distributed),
        t => Err(FormatError::UnknownVariant(t)),
    }
}

struct Encoder {
    out: Vec<u8>,
}

impl Encoder {
    fn u8(&mut self, v: u8) {
        self.out.push(v);
    }

    fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("model dimension fits u32");
        self.out.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.out.extend_from_slice(&v.to_le_bytes());
    }

    fn bank(&mut self, bank: &[GatingFilter]) {
        for f in bank {
            f.weights.iter().for_each(|&w| self.f64(w));
            self.f64(f.bias);
        }
    }

    fn node(&mut self, node: &Node) {
        if node.is_leaf() {
            self.u8(KIND_LEAF);
            self.u32(0);
        } else {
            self.u8(KIND_INTERNAL);
            self.u32(node.gating.len());
            self.bank(&node.gating);
            if let Some(b) = &node.gating2 {
                self.bank(b);
            }
        }
        self.f64(node.leafness_logit);
        node.payoff.iter().for_each(|&p| self.f64(p));
        if let Some((l, r)) = node.children() {
            self.node(l);
            self.node(r);
        }
    }
}

/// Serializes a model into its file representation.
pub fn encode_model(model: &ForestModel) -> Vec<u8> {
    let mut e = Encoder { out: Vec::new() };
    e.out.extend_from_slice(MODEL_MAGIC);
    e.out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    e.u32(model.input_dim());
    e.u32(model.class_count());
    e.u32(model.layers().len());
    for layer in model.layers() {
        e.u32(layer.spec.tree_count);
        e.u8(variant_tag(layer.spec.variant));
        e.u32(layer.spec.max_depth);
        e.u32(layer.spec.filters_per_node);
        for t in &layer.trees {
            e.node(t.root());
        }
    }
    e.out
}

/// Writes the model and returns the number of bytes written.
pub fn save_model<W: Write>(model: &ForestModel, mut sink: W) -> Result<u64> {
    let bytes = encode_model(model);
    sink.write_all(&bytes)?;
    sink.flush()?;
    Ok(bytes.len() as u64)
}

pub fn load_model<R: Read>(mut source: R) -> Result<ForestModel> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    decode_model(&bytes)
}

struct Decoder<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if n > self.bytes.len() - self.pos {
            return Err(FormatError::Truncated(self.bytes.len()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize, FormatError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f64(&mut self) -> Result<f64, FormatError> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, FormatError> {
        let len = n.checked_mul(8).ok_or(FormatError::Truncated(self.bytes.len()))?;
        let raw = self.take(len)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn bank(&mut self, filters: usize, d: usize) -> Result<Vec<GatingFilter>, FormatError> {
        // bound the allocation by what is actually left in the buffer
        let needed = filters.checked_mul(d + 1).and_then(|n| n.checked_mul(8));
        if needed.is_none_or(|n| n > self.bytes.len() - self.pos) {
            return Err(FormatError::Truncated(self.bytes.len()));
        }
        (0..filters)
            .map(|_| {
                let weights = self.f64s(d)?;
                let bias = self.f64()?;
                Ok(GatingFilter::new(weights, bias))
            })
            .collect()
    }

    fn node(&mut self, shape: &TreeShape, depth: usize) -> Result<Node, FormatError> {
        let at = self.pos;
        let kind = self.u8()?;
        let filters = self.u32()?;
        match kind {
            KIND_LEAF => {
                if filters != 0 {
                    return Err(FormatError::Invalid(format!(
                        "leaf at byte {at} declares {filters} filters"
                    )));
                }
                let leafness_logit = self.f64()?;
                let payoff = self.f64s(shape.classes)?;
                Ok(Node {
                    leafness_logit,
                    ..Node::leaf(payoff)
                })
            }
            KIND_INTERNAL => {
                if depth >= shape.max_depth {
                    return Err(FormatError::Invalid(format!(
                        "internal node at depth {depth} reaches the depth cap {}",
                        shape.max_depth
                    )));
                }
                if filters != shape.filters {
                    return Err(FormatError::Invalid(format!(
                        "node at byte {at} has {filters} filters, layer declares {}",
                        shape.filters
                    )));
                }
                let gating = self.bank(filters, shape.input_dim)?;
                let gating2 = match shape.variant {
                    Variant::Distributed => Some(self.bank(filters, shape.input_dim)?),
                    _ => None,
                };
                let leafness_logit = self.f64()?;
                let payoff = self.f64s(shape.classes)?;
                let left = self.node(shape, depth + 1)?;
                let right = self.node(shape, depth + 1)?;
                Ok(Node::internal(gating, gating2, leafness_logit, payoff, left, right))
            }
            k => Err(FormatError::UnknownNodeKind(k, at)),
        }
    }
}

struct TreeShape {
    variant: Variant,
    input_dim: usize,
    classes: usize,
    max_depth: usize,
    filters: usize,
}

/// Parses a complete model file. Every structural invariant is re-checked.
pub fn decode_model(bytes: &[u8]) -> Result<ForestModel> {
    let mut dec = Decoder { bytes, pos: 0 };
    let magic = dec.take(8).map_err(|_| FormatError::BadMagic)?;
    if magic != MODEL_MAGIC {
        return Err(FormatError::BadMagic.into());
    }
    let version = dec.u32()? as u32;
    if version != MODEL_VERSION {
        return Err(FormatError::UnsupportedVersion(version).into());
    }
    let input_dim = dec.u32()?;
    let class_count = dec.u32()?;
    let layer_count = dec.u32()?;
    if input_dim == 0 || class_count == 0 || layer_count == 0 {
        return Err(FormatError::Invalid("zero input dimension, class count or layer count".into()).into());
    }

    let mut specs: Vec<LayerSpec> = Vec::new();
    let mut layers = Vec::new();
    for l in 0..layer_count {
        let tree_count = dec.u32()?;
        let variant = variant_from_tag(dec.u8()?)?;
        let max_depth = dec.u32()?;
        let filters_per_node = dec.u32()?;
        if max_depth > MAX_SUPPORTED_DEPTH {
            return Err(FormatError::Invalid(format!("layer {l} max depth {max_depth} is too large")).into());
        }
        let spec = LayerSpec {
            tree_count,
            variant,
            max_depth,
            filters_per_node,
        };
        spec.validate().map_err(|e| FormatError::Invalid(e.to_string()))?;
        specs.push(spec);
        let d = layer_input_dim(input_dim, class_count, &specs, l);
        let shape = TreeShape {
            variant,
            input_dim: d,
            classes: class_count,
            max_depth,
            filters: filters_per_node,
        };
        let mut trees = Vec::new();
        for _ in 0..tree_count {
            let root = dec.node(&shape, 0)?;
            let tree = Tree::from_root(variant, d, class_count, max_depth, root)
                .map_err(|e| FormatError::Invalid(e.to_string()))?;
            trees.push(tree);
        }
        layers.push(Layer { spec, trees });
    }
    let rest = bytes.len() - dec.pos;
    if rest != 0 {
        return Err(FormatError::TrailingBytes(rest).into());
    }
    ForestModel::from_layers(layers, input_dim, class_count).map_err(|e| FormatError::Invalid(e.to_string()).into())
}
