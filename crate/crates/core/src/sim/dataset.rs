use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{simulate_with_id, Behavior, LabeledEncounter, Scenario, ScenarioConfig};
use crate::error::{Error, Result};
use crate::features::{lowess_smooth, FeatureDataset, LowessParams, PedestrianTrack};
use crate::rng;

/// The scenario mix used by the demo pipeline: every behavior while going
/// straight, plus right turns for the two crossing behaviors.
pub fn default_scenario_set() -> Vec<ScenarioConfig> {
    vec![
        ScenarioConfig::preset(Behavior::Cross, Scenario::GoingStraight),
        ScenarioConfig::preset(Behavior::Cross, Scenario::TurningRight),
        ScenarioConfig::preset(Behavior::CrossWithHesitation, Scenario::GoingStraight),
        ScenarioConfig::preset(Behavior::CrossWithHesitation, Scenario::TurningRight),
        ScenarioConfig::preset(Behavior::DriftAway, Scenario::GoingStraight),
        ScenarioConfig::preset(Behavior::ApproachFromRight, Scenario::GoingStraight),
    ]
}

/// Simulates `count` encounters per config.
///
/// Encounter `j` of config `c` gets global index `g = c * count + j` and the
/// seed derived from `(seed, "encounter", g)`, so the result does not depend
/// on how the work is scheduled.
pub fn generate_dataset(
    configs: &[ScenarioConfig],
    count: usize,
    seed: u64,
) -> Result<Vec<LabeledEncounter>> {
    if count == 0 {
        return Err(Error::invalid("encounter count per config must be at least 1"));
    }
    let jobs: Vec<(usize, &ScenarioConfig)> = configs
        .iter()
        .enumerate()
        .flat_map(|(c, cfg)| (0..count).map(move |j| (c * count + j, cfg)))
        .collect();
    jobs.into_par_iter()
        .map(|(g, cfg)| {
            let mut cfg = cfg.clone();
            cfg.rng_seed = rng::derive_seed(seed, "encounter", g as u64);
            simulate_with_id(&cfg, format!("{}-{}-{g:04}", cfg.behavior, cfg.scenario))
        })
        .collect()
}

pub fn smooth_tracks(tracks: &[PedestrianTrack], params: &LowessParams) -> Result<Vec<PedestrianTrack>> {
    tracks.par_iter().map(|t| lowess_smooth(t, params)).collect()
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureQuartiles {
    pub feature: String,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

/// Per-feature five-number summary over every row of the dataset.
pub fn summarize(ds: &FeatureDataset) -> Result<Vec<FeatureQuartiles>> {
    if ds.n_rows() == 0 {
        return Err(Error::invalid("cannot summarize an empty dataset"));
    }
    let states = ds.states();
    let names = ["px", "py", "vx", "vy", "ttc"];
    Ok(names
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let mut col: Vec<f64> = states.iter().map(|s| s.to_array()[c]).collect();
            col.sort_by(f64::total_cmp);
            FeatureQuartiles {
                feature: (*name).to_string(),
                min: col[0],
                q25: percentile_sorted(&col, 0.25),
                median: percentile_sorted(&col, 0.5),
                q75: percentile_sorted(&col, 0.75),
                max: col[col.len() - 1],
            }
        })
        .collect())
}
