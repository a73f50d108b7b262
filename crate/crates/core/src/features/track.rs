use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest coordinate magnitude accepted for a sensed ego-frame position.
pub const MAX_RANGE_M: f64 = 200.0;

/// A pedestrian position in the ego-vehicle body frame.
///
/// `x` points along the ego heading, `y` points to the left of it. Both are
/// in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoFramePoint {
    pub x: f64,
    pub y: f64,
}

impl EgoFramePoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.x.is_finite() || !self.y.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite position ({}, {})",
                self.x, self.y
            )));
        }
        if self.x.abs() > MAX_RANGE_M || self.y.abs() > MAX_RANGE_M {
            return Err(Error::invalid(format!(
                "position ({}, {}) outside the {MAX_RANGE_M} m sensing range",
                self.x, self.y
            )));
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// A uniformly sampled ego-frame trajectory of one pedestrian.
///
/// Point `k` is observed at time `k / frame_rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianTrack {
    pub id: String,
    pub frame_rate: f64,
    pub points: Vec<EgoFramePoint>,
}

impl PedestrianTrack {
    pub fn new(id: impl Into<String>, frame_rate: f64, points: Vec<EgoFramePoint>) -> Result<Self> {
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(Error::invalid(format!("frame rate must be positive, got {frame_rate}")));
        }
        for p in &points {
            p.validate()?;
        }
        Ok(Self {
            id: id.into(),
            frame_rate,
            points,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.frame_rate
    }

    /// The first `len` frames.
    pub fn prefix(&self, len: usize) -> PedestrianTrack {
        PedestrianTrack {
            id: self.id.clone(),
            frame_rate: self.frame_rate,
            points: self.points[..len.min(self.points.len())].to_vec(),
        }
    }
}
