use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::kinematics::{check_t_max, compute_ttc, velocities_of};
use super::track::{EgoFramePoint, PedestrianTrack};
use crate::error::{Error, Result};
use crate::linalg::RowMatrix;

/// Per-frame spatiotemporal state of a pedestrian relative to the ego vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureState {
    pub px: f64,
    pub py: f64,
    pub vx: f64,
    pub vy: f64,
    pub ttc: f64,
}

impl FeatureState {
    pub fn to_array(&self) -> [f64; 5] {
        [self.px, self.py, self.vx, self.vy, self.ttc]
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        match *v {
            [px, py, vx, vy, ttc] => Ok(Self { px, py, vx, vy, ttc }),
            _ => Err(Error::invalid(format!("feature state needs 5 values, got {}", v.len()))),
        }
    }
}

/// Which subset of a [`FeatureState`] feeds a clustering or classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureVariant {
    LocationOnly,
    VelocityOnly,
    TtcOnly,
    All,
}

impl FeatureVariant {
    pub const ALL_VARIANTS: [FeatureVariant; 4] = [
        FeatureVariant::LocationOnly,
        FeatureVariant::VelocityOnly,
        FeatureVariant::TtcOnly,
        FeatureVariant::All,
    ];

    pub fn dim(self) -> usize {
        match self {
            FeatureVariant::LocationOnly | FeatureVariant::VelocityOnly => 2,
            FeatureVariant::TtcOnly => 1,
            FeatureVariant::All => 5,
        }
    }

    /// Column indices into `FeatureState::to_array`.
    pub fn columns(self) -> &'static [usize] {
        match self {
            FeatureVariant::LocationOnly => &[0, 1],
            FeatureVariant::VelocityOnly => &[2, 3],
            FeatureVariant::TtcOnly => &[4],
            FeatureVariant::All => &[0, 1, 2, 3, 4],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureVariant::LocationOnly => "location",
            FeatureVariant::VelocityOnly => "velocity",
            FeatureVariant::TtcOnly => "ttc",
            FeatureVariant::All => "all",
        }
    }
}

impl fmt::Display for FeatureVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "location" => Ok(FeatureVariant::LocationOnly),
            "velocity" => Ok(FeatureVariant::VelocityOnly),
            "ttc" => Ok(FeatureVariant::TtcOnly),
            "all" => Ok(FeatureVariant::All),
            other => Err(Error::invalid(format!(
                "unknown feature variant '{other}' (expected location, velocity, ttc or all)"
            ))),
        }
    }
}

pub fn select_features(state: &FeatureState, variant: FeatureVariant) -> Vec<f64> {
    let a = state.to_array();
    variant.columns().iter().map(|&c| a[c]).collect()
}

/// Composes position, finite-difference velocity and TTC for every frame.
pub fn build_feature_states(track: &PedestrianTrack, t_max: f64) -> Result<Vec<FeatureState>> {
    if track.len() < 2 {
        return Err(Error::invalid(format!(
            "track {} has {} frames; features need at least 2",
            track.id,
            track.len()
        )));
    }
    states_from_points(&track.points, track.frame_rate, t_max)
}

pub(crate) fn states_from_points(
    points: &[EgoFramePoint],
    frame_rate: f64,
    t_max: f64,
) -> Result<Vec<FeatureState>> {
    check_t_max(t_max)?;
    let vel = velocities_of(points, frame_rate);
    points
        .iter()
        .zip(vel)
        .map(|(p, v)| {
            let s = FeatureState {
                px: p.x,
                py: p.y,
                vx: v.0,
                vy: v.1,
                ttc: compute_ttc(*p, v, t_max),
            };
            if s.to_array().iter().all(|x| x.is_finite()) {
                Ok(s)
            } else {
                Err(Error::numerical(format!("non-finite feature state {s:?}")))
            }
        })
        .collect()
}

/// Feature states of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackFeatures {
    pub id: String,
    pub states: Vec<FeatureState>,
}

/// Feature states of a set of trajectories, row order = track order then frame.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureDataset {
    pub tracks: Vec<TrackFeatures>,
}

impl FeatureDataset {
    pub fn from_tracks(tracks: &[PedestrianTrack], t_max: f64) -> Result<Self> {
        let tracks = tracks
            .iter()
            .map(|t| {
                Ok(TrackFeatures {
                    id: t.id.clone(),
                    states: build_feature_states(t, t_max)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { tracks })
    }

    pub fn n_tracks(&self) -> usize {
        self.tracks.len()
    }

    pub fn n_rows(&self) -> usize {
        self.tracks.iter().map(|t| t.states.len()).sum()
    }

    pub fn track_lengths(&self) -> Vec<usize> {
        self.tracks.iter().map(|t| t.states.len()).collect()
    }

    /// `(track id, frame, state)` for every row.
    pub fn rows(&self) -> impl Iterator<Item = (&str, usize, &FeatureState)> {
        self.tracks.iter().flat_map(|t| {
            t.states
                .iter()
                .enumerate()
                .map(move |(k, s)| (t.id.as_str(), k, s))
        })
    }

    pub fn states(&self) -> Vec<FeatureState> {
        self.rows().map(|(_, _, s)| *s).collect()
    }

    pub fn matrix(&self, variant: FeatureVariant) -> RowMatrix {
        let cols = variant.dim();
        let mut data = Vec::with_capacity(self.n_rows() * cols);
        for (_, _, s) in self.rows() {
            data.extend(select_features(s, variant));
        }
        RowMatrix::new(self.n_rows(), cols, data).expect("consistent feature matrix")
    }
}
