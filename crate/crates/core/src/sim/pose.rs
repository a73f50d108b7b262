use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::features::EgoFramePoint;

/// World-frame pose of the ego vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoPose {
    pub x_w: f64,
    pub y_w: f64,
    /// Radians, normalized to (-pi, pi].
    pub heading: f64,
    pub speed: f64,
}

impl EgoPose {
    pub fn new(x_w: f64, y_w: f64, heading: f64, speed: f64) -> Self {
        Self {
            x_w,
            y_w,
            heading: normalize_angle(heading),
            speed,
        }
    }
}

pub fn normalize_angle(a: f64) -> f64 {
    let mut a = a.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    // rem_euclid maps -pi to pi already; keep the half-open interval explicit
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Expresses a world point in the ego body frame (x forward, y left).
pub fn to_ego_frame(pose: &EgoPose, world: (f64, f64)) -> EgoFramePoint {
    let dx = world.0 - pose.x_w;
    let dy = world.1 - pose.y_w;
    let (s, c) = pose.heading.sin_cos();
    EgoFramePoint::new(c * dx + s * dy, -s * dx + c * dy)
}

pub fn from_ego_frame(pose: &EgoPose, p: EgoFramePoint) -> (f64, f64) {
    let (s, c) = pose.heading.sin_cos();
    (pose.x_w + c * p.x - s * p.y, pose.y_w + s * p.x + c * p.y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ego_frame_examples() {
        let p = to_ego_frame(&EgoPose::new(0.0, 0.0, 0.0, 0.0), (3.0, 4.0));
        assert_eq!((p.x, p.y), (3.0, 4.0));
        let p = to_ego_frame(&EgoPose::new(0.0, 0.0, PI / 2.0, 0.0), (0.0, 5.0));
        assert!((p.x - 5.0).abs() < 1e-12 && p.y.abs() < 1e-12);
        let p = to_ego_frame(&EgoPose::new(1.0, 1.0, 0.0, 0.0), (1.0, 1.0));
        assert_eq!((p.x, p.y), (0.0, 0.0));
    }

    #[test]
    fn heading_normalized() {
        assert!((EgoPose::new(0.0, 0.0, 3.0 * PI, 0.0).heading - PI).abs() < 1e-12);
        assert!((EgoPose::new(0.0, 0.0, -PI, 0.0).heading - PI).abs() < 1e-12);
        assert!((EgoPose::new(0.0, 0.0, -0.5, 0.0).heading + 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn round_trip(x in -100.0..100.0f64, y in -100.0..100.0f64, h in -10.0..10.0f64,
                      wx in -100.0..100.0f64, wy in -100.0..100.0f64) {
            let pose = EgoPose::new(x, y, h, 1.0);
            let back = from_ego_frame(&pose, to_ego_frame(&pose, (wx, wy)));
            prop_assert!((back.0 - wx).abs() < 1e-9 && (back.1 - wy).abs() < 1e-9);
        }
    }
}
