//! Label-aware linear privatizer trained against an adversarial classifier.
//!
//! The filter adds label-dependent shifts and mixed Gaussian noise to latent
//! vectors. Training alternates between an adversary predicting the private
//! label, a utility classifier predicting the utility label, and a gradient
//! step on the filter that raises the adversary's loss, lowers the utility
//! loss and keeps a distortion surrogate under the budget via a squared hinge.

mod checkpoint;
mod filter;
mod mlp;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use filter::{
    distortion_estimate, distortion_from_frequencies, distortion_with_gradient, FilterParameters,
};
pub use mlp::{
    argmax, fit_classifier, CrossEntropy, FitConfig, MlpClassifier, MlpGradients, DEFAULT_HIDDEN,
};
pub use train::{
    evaluate_privatizer, filter_objective, pooled_within_cell_variance, train_privatizer,
    Evaluation, FilterBatch, FilterObjective, TrainConfig, TrainRecord, TrainTrace,
    TrainedPrivatizer,
};
