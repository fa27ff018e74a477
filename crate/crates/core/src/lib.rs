//! Gradient-trained soft decision trees with learnable topology, stacked into
//! layer-wise deep forests.
//!
//! * [`tree`]: node/tree data model, the soft, budding and distributed
//!   forward passes, multi-filter gating, parameter counting and pruning.
//! * [`training`]: softmax cross-entropy, hand-derived backpropagation, a
//!   finite-difference oracle, momentum SGD and greedy soft-tree growth.
//! * [`forest`]: bootstrap sampling, layer-wise training, inter-layer
//!   features and averaged prediction.
//! * [`data`]: MNIST IDX parsing, affine augmentation, synthetic fixtures.
//! * [`model_io`]: binary model files and DOT topology export.

pub mod data;
mod error;
pub mod forest;
pub mod model_io;
pub mod seed;
pub mod training;
pub mod tree;

pub use error::{Error, Result};
pub use forest::{ForestModel, LayerSpec, Prediction};
pub use tree::{GatingFilter, Node, Tree, TreeOutput, Variant};
