//! Two-layer graph convolutional network for node suspiciousness:
//! `softmax(Â · relu(Â X W1) · W2)` with `Â = D^{-1/2}(A + I)D^{-1/2}` over the
//! undirected transaction graph. Forward, hand-derived backward, full-batch
//! training, evaluation, and a logistic-regression baseline.

mod adjacency;
mod baseline;
mod eval;
mod features;
mod model;
mod train;

pub use adjacency::{norm_weight, normalize_adjacency, NormalizedAdjacency};
pub use baseline::{LogisticRegression, BASELINE_COLUMNS};
pub use eval::{accuracy, best_threshold, binary_f1, class_scores, evaluate, BinaryScores, EvalSummary};
pub use features::standardize;
pub use model::{
    forward, forward_cached, loss_and_grads, loss_and_grads_weighted, read_checkpoint, write_checkpoint, ForwardCache, GcnModel, Grads,
    CHECKPOINT_MAGIC,
};
pub use train::{
    full_epoch_flops, labels_from_accounts, ClassWeighting, stratified_split, train_full, write_metrics_csv, EpochMetrics,
    Hyper, Optimizer, OptimizerState, TrainOutcome, TrainSplit,
};
pub(crate) use model::cross_entropy;
pub(crate) use train::CLASSES;
pub(crate) use adjacency::spmm_row;
