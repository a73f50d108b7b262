//! Risk-sequence prediction: observed prefix, LSTM future, spliced features,
//! classified risk levels, and evaluation against true futures.

mod confusion;
pub mod demo;
mod report;
mod sequence;

pub use confusion::{confusion, ConfusionMatrix};
pub use demo::{manifest_text_for, run_demo, DemoOutcome, Labeling, Split};
pub use report::{
    ade_by_horizon, confusion_rows, end_to_end_evaluate, summary_text, sweep_rows, write_report, EvaluationReport,
    SWEEP_HEADER,
};
pub use sequence::{
    actual_risk_sequence, evaluate_windows_end_to_end, predict_risk_sequence, spliced_states, RiskSequence,
    WindowOutcome,
};
