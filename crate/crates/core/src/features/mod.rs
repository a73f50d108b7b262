//! Feature extraction from ego-frame pedestrian trajectories.

mod kinematics;
mod lowess;
mod state;
mod track;

pub use kinematics::{
    compute_ttc, compute_velocity, DEFAULT_T_MAX, MIN_CLOSING_SPEED, TTC_AT_CONTACT,
};
pub use lowess::{lowess_series, lowess_smooth, LowessParams};
pub use state::{
    build_feature_states, select_features, FeatureDataset, FeatureState, FeatureVariant,
    TrackFeatures,
};
pub(crate) use state::states_from_points;
pub use track::{EgoFramePoint, PedestrianTrack, MAX_RANGE_M};
