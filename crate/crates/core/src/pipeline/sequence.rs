use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::RiskLabel;
use crate::error::{Error, Result};
use crate::features::{states_from_points, EgoFramePoint, FeatureState, PedestrianTrack};
use crate::lstm::{constant_velocity, predict_window, LstmModel, MIN_OBSERVED};
use crate::svm::SvmModel;

/// Risk labels of the `T_pred` frames following an observed prefix.
///
/// `t` is the number of observed frames, so `labels[k]` belongs to frame
/// `t + k` (frames counted from 0).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskSequence {
    pub id: String,
    pub t: usize,
    pub labels: Vec<RiskLabel>,
}

/// Feature states of the `future` frames appended to `observed`, with
/// velocity and TTC computed on the spliced track.
pub fn spliced_states(
    observed: &[EgoFramePoint],
    future: &[EgoFramePoint],
    frame_rate: f64,
    t_max: f64,
) -> Result<Vec<FeatureState>> {
    let mut pts = observed.to_vec();
    pts.extend_from_slice(future);
    let states = states_from_points(&pts, frame_rate, t_max)?;
    Ok(states[observed.len()..].to_vec())
}

fn check_prefix(len: usize) -> Result<()> {
    if len < MIN_OBSERVED {
        return Err(Error::invalid(format!(
            "observed prefix has {len} frames, at least {MIN_OBSERVED} are needed"
        )));
    }
    Ok(())
}

/// Predicts the next `t_pred` positions of an observed prefix and classifies
/// the feature state of each predicted frame.
pub fn predict_risk_sequence(
    lstm: &LstmModel,
    clf: &SvmModel,
    observed: &PedestrianTrack,
    t_pred: usize,
    t_max: f64,
) -> Result<RiskSequence> {
    check_prefix(observed.len())?;
    let future = predict_window(lstm, &observed.points, t_pred)?;
    let states = spliced_states(&observed.points, &future, observed.frame_rate, t_max)?;
    Ok(RiskSequence {
        id: observed.id.clone(),
        t: observed.len(),
        labels: states.iter().map(|s| clf.predict(s)).collect(),
    })
}

/// Classifies the true feature states of frames `t .. t + t_pred`.
pub fn actual_risk_sequence(
    clf: &SvmModel,
    track: &PedestrianTrack,
    t: usize,
    t_pred: usize,
    t_max: f64,
) -> Result<RiskSequence> {
    check_prefix(t)?;
    if t + t_pred > track.len() {
        return Err(Error::invalid(format!(
            "window {t}..{} exceeds track {} of {} frames",
            t + t_pred,
            track.id,
            track.len()
        )));
    }
    let states = spliced_states(&track.points[..t], &track.points[t..t + t_pred], track.frame_rate, t_max)?;
    Ok(RiskSequence {
        id: track.id.clone(),
        t,
        labels: states.iter().map(|s| clf.predict(s)).collect(),
    })
}

/// Everything computed for one evaluation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowOutcome {
    pub track: usize,
    pub predicted: RiskSequence,
    pub actual: RiskSequence,
    /// LSTM displacement error at each predicted frame.
    pub step_errors: Vec<f64>,
    /// Constant-velocity displacement error at each predicted frame.
    pub baseline_step_errors: Vec<f64>,
}

impl WindowOutcome {
    pub fn ade(&self) -> f64 {
        mean(&self.step_errors)
    }

    pub fn baseline_ade(&self) -> f64 {
        mean(&self.baseline_step_errors)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn displacements(a: &[EgoFramePoint], b: &[EgoFramePoint]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| (p.x - q.x).hypot(p.y - q.y)).collect()
}

/// Runs the full chain on every valid window of every track, in track then
/// window order.
pub fn evaluate_windows_end_to_end(
    lstm: &LstmModel,
    clf: &SvmModel,
    tracks: &[PedestrianTrack],
    t_pred: usize,
    t_max: f64,
) -> Result<Vec<WindowOutcome>> {
    let jobs: Vec<(usize, usize)> = tracks
        .iter()
        .enumerate()
        .flat_map(|(i, tr)| crate::lstm::window_prefixes(tr.len(), t_pred).map(move |t| (i, t)))
        .collect();
    jobs.into_par_iter()
        .map(|(i, t)| {
            let track = &tracks[i];
            let observed = track.prefix(t);
            let truth = &track.points[t..t + t_pred];
            let future = predict_window(lstm, &observed.points, t_pred)?;
            let states = spliced_states(&observed.points, &future, track.frame_rate, t_max)?;
            let predicted = RiskSequence {
                id: track.id.clone(),
                t,
                labels: states.iter().map(|s| clf.predict(s)).collect(),
            };
            Ok(WindowOutcome {
                track: i,
                predicted,
                actual: actual_risk_sequence(clf, track, t, t_pred, t_max)?,
                step_errors: displacements(&future, truth),
                baseline_step_errors: displacements(&constant_velocity(&observed.points, t_pred)?, truth),
            })
        })
        .collect()
}
