//! Mini-batch training with global-norm gradient clipping.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::PedestrianTrack;
use crate::rng;

use super::grad::track_loss_grad;
use super::model::{LstmModel, Normalizer, OutputMode};

/// Observed frames before the first prediction window.
pub const MIN_OBSERVED: usize = 4;
pub const DIVERGENCE_LOSS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Heavy-ball gradient descent, `v = m v - lr g`.
    Momentum,
    /// Adam with `beta1 = momentum`, `beta2 = 0.999`, `eps = 1e-8`.
    #[default]
    Adam,
}

impl std::fmt::Display for Optimizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Optimizer::Momentum => "momentum",
            Optimizer::Adam => "adam",
        })
    }
}

impl std::str::FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "momentum" => Ok(Optimizer::Momentum),
            "adam" => Ok(Optimizer::Adam),
            other => Err(Error::invalid(format!("unknown optimizer '{other}' (expected momentum or adam)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    /// Tracks per mini-batch; every window of a track joins its batch.
    pub batch_size: usize,
    pub clip_norm: f64,
    pub seed: u64,
    pub t_pred: usize,
    pub output_mode: OutputMode,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 32,
            learning_rate: 0.002,
            momentum: 0.9,
            epochs: 200,
            batch_size: 4,
            clip_norm: 5.0,
            seed: 0,
            t_pred: 5,
            output_mode: OutputMode::Residual,
            optimizer: Optimizer::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden_dim", self.hidden_dim as f64),
            ("learning_rate", self.learning_rate),
            ("epochs", self.epochs as f64),
            ("batch_size", self.batch_size as f64),
            ("clip_norm", self.clip_norm),
            ("t_pred", self.t_pred as f64),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!("momentum must be in [0, 1), got {}", self.momentum)));
        }
        Ok(())
    }
}

/// Prefix lengths `t` of every prediction window in a track of `len` points:
/// `MIN_OBSERVED ..= len - t_pred`.
pub fn window_prefixes(len: usize, t_pred: usize) -> std::ops::RangeInclusive<usize> {
    if len < MIN_OBSERVED + t_pred {
        #[allow(clippy::reversed_empty_ranges)]
        return 1..=0;
    }
    MIN_OBSERVED..=len - t_pred
}

/// Per-axis RMS of frame-to-frame displacement, floored so a motionless
/// axis still gets a usable scale.
fn step_rms(seqs: &[Vec<[f64; 2]>]) -> [f64; 2] {
    let mut sum = [0.0; 2];
    let mut n = 0usize;
    for s in seqs {
        for w in s.windows(2) {
            for a in 0..2 {
                sum[a] += (w[1][a] - w[0][a]).powi(2);
            }
            n += 1;
        }
    }
    let n = n.max(1) as f64;
    [(sum[0] / n).sqrt().max(1e-3), (sum[1] / n).sqrt().max(1e-3)]
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: LstmModel,
    /// Mean window loss (normalized units) per epoch.
    pub history: Vec<f64>,
}

pub fn train(tracks: &[PedestrianTrack], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let usable: Vec<&PedestrianTrack> = tracks
        .iter()
        .filter(|t| t.len() >= MIN_OBSERVED + config.t_pred)
        .collect();
    if usable.len() < 2 {
        return Err(Error::invalid(format!(
            "training needs at least 2 trajectories of {} or more points, found {}",
            MIN_OBSERVED + config.t_pred,
            usable.len()
        )));
    }
    let norm = Normalizer::fit(usable.iter().flat_map(|t| t.points.iter()))?;
    let seqs: Vec<Vec<[f64; 2]>> = usable
        .iter()
        .map(|t| t.points.iter().map(|p| norm.forward(*p)).collect())
        .collect();
    let prefixes: Vec<Vec<usize>> = seqs.iter().map(|s| window_prefixes(s.len(), config.t_pred).collect()).collect();

    let mut model = LstmModel::init(config.hidden_dim, config.seed)?;
    model.norm = norm;
    model.output_mode = config.output_mode;
    if config.output_mode == OutputMode::Residual {
        model.step_scale = step_rms(&seqs);
    }
    let n_params = model.n_params();
    let mut velocity = vec![0.0; n_params];
    let mut second = vec![0.0; n_params];
    let mut updates = 0i32;
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..seqs.len()).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng::stream(config.seed, "lstm-epoch", epoch as u64));
        let mut epoch_loss = 0.0;
        let mut epoch_windows = 0usize;
        for batch in order.chunks(config.batch_size) {
            let windows: usize = batch.iter().map(|&i| prefixes[i].len()).sum();
            let weight = 1.0 / windows as f64;
            let parts: Vec<(f64, Vec<f64>)> = batch
                .par_iter()
                .map(|&i| {
                    let mut g = vec![0.0; n_params];
                    let l = track_loss_grad(&model, &seqs[i], &prefixes[i], config.t_pred, weight, Some(&mut g))?;
                    Ok((l, g))
                })
                .collect::<Result<_>>()?;
            let mut grad = vec![0.0; n_params];
            let mut loss = 0.0;
            for (l, g) in parts {
                loss += l;
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            if !loss.is_finite() || loss > DIVERGENCE_LOSS {
                return Err(Error::numerical(format!(
                    "training diverged at epoch {} (batch loss {loss})",
                    epoch + 1
                )));
            }
            epoch_loss += loss * windows as f64;
            epoch_windows += windows;

            let norm2: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            let clip = if norm2 > config.clip_norm { config.clip_norm / norm2 } else { 1.0 };
            updates += 1;
            match config.optimizer {
                Optimizer::Momentum => {
                    for ((p, v), g) in model.params.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                        *v = config.momentum * *v - config.learning_rate * clip * g;
                        *p += *v;
                    }
                }
                Optimizer::Adam => {
                    const BETA2: f64 = 0.999;
                    let b1 = config.momentum;
                    let c1 = 1.0 - b1.powi(updates);
                    let c2 = 1.0 - BETA2.powi(updates);
                    for (((p, m), v), g) in model.params.iter_mut().zip(velocity.iter_mut()).zip(second.iter_mut()).zip(&grad) {
                        let g = clip * g;
                        *m = b1 * *m + (1.0 - b1) * g;
                        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                        *p -= config.learning_rate * (*m / c1) / ((*v / c2).sqrt() + 1e-8);
                    }
                }
            }
        }
        let mean = epoch_loss / epoch_windows as f64;
        if !mean.is_finite() || mean > DIVERGENCE_LOSS {
            return Err(Error::numerical(format!("training diverged at epoch {} (loss {mean})", epoch + 1)));
        }
        history.push(mean);
    }
    model.validate()?;
    Ok(TrainOutcome { model, history })
}
