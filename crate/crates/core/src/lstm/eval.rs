//! Displacement errors, the constant-velocity baseline, cross-validation
//! splits and the prediction-window sweep.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{EgoFramePoint, PedestrianTrack};
use crate::rng;

use super::grad::check_lengths;
use super::model::{predict_window, LstmModel};
use super::train::{train, window_prefixes, TrainConfig};

/// Mean Euclidean displacement between two point sequences.
pub fn ade(predicted: &[EgoFramePoint], actual: &[EgoFramePoint]) -> Result<f64> {
    check_lengths(predicted, actual)?;
    Ok(predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p.x - a.x).hypot(p.y - a.y))
        .sum::<f64>()
        / predicted.len() as f64)
}

/// Extrapolates the last observed displacement for `t_pred` frames.
pub fn constant_velocity(observed: &[EgoFramePoint], t_pred: usize) -> Result<Vec<EgoFramePoint>> {
    let n = observed.len();
    if n == 0 {
        return Err(Error::invalid("constant-velocity baseline needs an observed point"));
    }
    let last = observed[n - 1];
    let (dx, dy) = if n >= 2 {
        (last.x - observed[n - 2].x, last.y - observed[n - 2].y)
    } else {
        (0.0, 0.0)
    };
    Ok((1..=t_pred)
        .map(|k| EgoFramePoint::new(last.x + k as f64 * dx, last.y + k as f64 * dy))
        .collect())
}

/// Errors of one prediction window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowError {
    pub track: usize,
    /// Number of observed frames.
    pub t: usize,
    pub ade: f64,
    pub baseline_ade: f64,
    /// Displacement at each horizon step.
    pub step_errors: Vec<f64>,
}

/// Scores every window of every track against the LSTM and the
/// constant-velocity baseline.
pub fn evaluate_windows(model: &LstmModel, tracks: &[PedestrianTrack], t_pred: usize) -> Result<Vec<WindowError>> {
    let jobs: Vec<(usize, usize)> = tracks
        .iter()
        .enumerate()
        .flat_map(|(i, tr)| window_prefixes(tr.len(), t_pred).map(move |t| (i, t)))
        .collect();
    jobs.into_par_iter()
        .map(|(i, t)| {
            let pts = &tracks[i].points;
            let truth = &pts[t..t + t_pred];
            let pred = predict_window(model, &pts[..t], t_pred)?;
            let base = constant_velocity(&pts[..t], t_pred)?;
            Ok(WindowError {
                track: i,
                t,
                ade: ade(&pred, truth)?,
                baseline_ade: ade(&base, truth)?,
                step_errors: pred.iter().zip(truth).map(|(p, a)| (p.x - a.x).hypot(p.y - a.y)).collect(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdeSummary {
    pub windows: usize,
    pub ade: f64,
    pub baseline_ade: f64,
}

pub fn summarize_windows<'a>(errors: impl IntoIterator<Item = &'a WindowError>) -> AdeSummary {
    let (mut n, mut a, mut b) = (0usize, 0.0, 0.0);
    for e in errors {
        n += 1;
        a += e.ade;
        b += e.baseline_ade;
    }
    let d = n.max(1) as f64;
    AdeSummary {
        windows: n,
        ade: a / d,
        baseline_ade: b / d,
    }
}

/// Fold index of each of `n` items for every repeat. Each repeat is its own
/// seeded shuffle; fold sizes differ by at most one.
pub fn kfold_split(n: usize, k: usize, repeats: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    if n < k {
        return Err(Error::invalid(format!("cannot split {n} trajectories into {k} folds")));
    }
    if repeats == 0 {
        return Err(Error::invalid("cross-validation needs at least one repeat"));
    }
    Ok((0..repeats)
        .map(|r| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng::stream(seed, "kfold", r as u64));
            let mut fold = vec![0; n];
            for (pos, i) in order.into_iter().enumerate() {
                fold[i] = pos % k;
            }
            fold
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t_pred: usize,
    pub ade: f64,
    pub baseline_ade: f64,
    pub windows: usize,
}

/// Cross-validated ADE for every horizon in `t_range`.
///
/// Each (horizon, repeat, fold) trains a fresh model on the other folds and
/// scores the held-out trajectories; the row reports the mean over all
/// held-out windows.
pub fn sweep_prediction_window(
    tracks: &[PedestrianTrack],
    t_range: std::ops::RangeInclusive<usize>,
    config: &TrainConfig,
    folds: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let split = kfold_split(tracks.len(), folds, repeats, seed)?;
    let horizons: Vec<usize> = t_range.collect();
    if horizons.is_empty() || horizons[0] == 0 {
        return Err(Error::invalid("horizon range must be non-empty and start at 1 or more"));
    }
    let jobs: Vec<(usize, usize, usize)> = horizons
        .iter()
        .flat_map(|&t| (0..repeats).flat_map(move |r| (0..folds).map(move |f| (t, r, f))))
        .collect();
    let results: Vec<(usize, Vec<WindowError>)> = jobs
        .into_par_iter()
        .map(|(t_pred, r, f)| {
            let train_set: Vec<PedestrianTrack> = (0..tracks.len())
                .filter(|&i| split[r][i] != f)
                .map(|i| tracks[i].clone())
                .collect();
            let test_set: Vec<PedestrianTrack> = (0..tracks.len())
                .filter(|&i| split[r][i] == f)
                .map(|i| tracks[i].clone())
                .collect();
            let cfg = TrainConfig {
                t_pred,
                seed: rng::derive_seed(config.seed, "sweep", ((t_pred * repeats + r) * folds + f) as u64),
                ..config.clone()
            };
            let out = train(&train_set, &cfg)?;
            Ok((t_pred, evaluate_windows(&out.model, &test_set, t_pred)?))
        })
        .collect::<Result<_>>()?;
    Ok(horizons
        .iter()
        .map(|&t| {
            let s = summarize_windows(results.iter().filter(|(h, _)| *h == t).flat_map(|(_, e)| e.iter()));
            SweepRow {
                t_pred: t,
                ade: s.ade,
                baseline_ade: s.baseline_ade,
                windows: s.windows,
            }
        })
        .collect())
}
