//! Pedestrian spatiotemporal risk-level prediction.
//!
//! The crate turns ego-frame pedestrian trajectories into per-frame feature
//! states, predicts future positions with an LSTM, discovers risk regimes by
//! clustering, trains kernel SVMs on the discovered regimes and finally labels
//! every predicted future frame with one of four risk levels.

pub mod cluster;
pub mod config;
pub mod error;
pub mod features;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod lstm;
pub mod pipeline;
pub mod rng;
pub mod sim;
pub mod standardize;
pub mod svm;

pub use error::{Error, Result};
