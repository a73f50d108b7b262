//! Synthetic vehicle-perspective encounter generation.

mod dataset;
mod pose;
mod scenario;

pub use dataset::{
    default_scenario_set, generate_dataset, percentile_sorted, smooth_tracks, summarize,
    FeatureQuartiles,
};
pub use pose::{from_ego_frame, normalize_angle, to_ego_frame, EgoPose};
pub use scenario::{
    simulate_encounter, AccelSegment, Behavior, LabeledEncounter, Scenario, ScenarioConfig,
    SpeedProfile, Span,
};
