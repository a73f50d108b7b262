//! Kernel SVM risk classifier.

pub mod binary;
pub mod multiclass;

pub use binary::{kkt_violation, svm_train_binary, BinaryFit, BinarySvm};
pub use multiclass::{
    cross_validate, evaluate_classifier, kfold_indices, standardized_matrix, svm_train_multiclass, Evaluation,
    FoldResult, PairMachine, SvmModel, SvmSettings, MIN_TIMED_PREDICTIONS,
};
