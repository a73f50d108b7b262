//! LSTM trajectory predictor over ego-frame positions.

pub mod eval;
pub mod grad;
pub mod model;
pub mod train;

pub use eval::{
    ade, constant_velocity, evaluate_windows, kfold_split, summarize_windows, sweep_prediction_window, AdeSummary,
    SweepRow, WindowError,
};
pub use grad::{gradients_bptt, loss_mse};
pub use model::{cell_forward, predict_window, sequence_forward, Gate, LstmDoc, LstmModel, LstmState, Normalizer, OutputMode};
pub use train::{train, window_prefixes, Optimizer, TrainConfig, TrainOutcome, DIVERGENCE_LOSS, MIN_OBSERVED};
