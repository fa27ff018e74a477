//! Loss, backpropagation, optimization and tree growth.

mod dd;
mod grad;
mod growth;
mod loss;
mod optim;

pub use grad::{
    backward, compare_gradients, finite_difference_grad, relative_error, GradBuffer, GradientDiscrepancy, Workspace,
};
pub use growth::{grow_soft_tree, GrownTree, GrowthConfig};
pub use loss::{loss, softmax};
pub use optim::{
    argmax, mean_loss, sgd_step, train_tree, train_tree_indexed, train_tree_masked, tree_accuracy, TrainConfig,
    TrainLog,
};
