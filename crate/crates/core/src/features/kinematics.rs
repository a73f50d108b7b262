//! Relative velocity and time-to-collision.

use super::track::{EgoFramePoint, PedestrianTrack};
use crate::error::{Error, Result};

/// Default TTC horizon in seconds.
pub const DEFAULT_T_MAX: f64 = 10.0;
/// TTC reported when the pedestrian sits exactly at the ego origin.
pub const TTC_AT_CONTACT: f64 = 1e-3;
/// Smallest closing speed used as a divisor, m/s.
pub const MIN_CLOSING_SPEED: f64 = 1e-9;

/// Finite-difference relative velocity per frame. Frame 0 has zero velocity.
pub fn compute_velocity(track: &PedestrianTrack) -> Vec<(f64, f64)> {
    velocities_of(&track.points, track.frame_rate)
}

pub(crate) fn velocities_of(points: &[EgoFramePoint], frame_rate: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(points.len());
    if !points.is_empty() {
        out.push((0.0, 0.0));
    }
    for w in points.windows(2) {
        out.push(((w[1].x - w[0].x) * frame_rate, (w[1].y - w[0].y) * frame_rate));
    }
    out
}

/// Time to collision under constant relative velocity, capped at `t_max`.
///
/// The closing speed is the negated radial component of `v` along the
/// direction from the ego origin to the pedestrian. Receding or purely
/// tangential motion never closes the gap and yields `t_max`.
pub fn compute_ttc(p: EgoFramePoint, v: (f64, f64), t_max: f64) -> f64 {
    let dist = p.norm();
    if dist == 0.0 {
        return TTC_AT_CONTACT.min(t_max);
    }
    let radial = (v.0 * p.x + v.1 * p.y) / dist;
    let closing = -radial;
    if closing.is_nan() || closing <= 0.0 {
        return t_max;
    }
    (dist / closing.max(MIN_CLOSING_SPEED)).min(t_max)
}

pub(crate) fn check_t_max(t_max: f64) -> Result<()> {
    if t_max.is_finite() && t_max > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("t_max must be positive, got {t_max}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn track(points: &[(f64, f64)]) -> PedestrianTrack {
        PedestrianTrack::new(
            "t",
            6.5,
            points.iter().map(|&(x, y)| EgoFramePoint::new(x, y)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn velocity_examples() {
        let v = compute_velocity(&track(&[(10.0, 2.0), (9.5, 2.0), (9.5, 2.0)]));
        assert_eq!(v[0], (0.0, 0.0));
        assert!((v[1].0 + 3.25).abs() < 1e-12 && v[1].1 == 0.0);
        assert_eq!(v[2], (0.0, 0.0));
    }

    #[test]
    fn ttc_examples() {
        assert_eq!(compute_ttc(EgoFramePoint::new(10.0, 0.0), (-2.0, 0.0), 10.0), 5.0);
        assert_eq!(compute_ttc(EgoFramePoint::new(10.0, 0.0), (1.0, 0.0), 10.0), 10.0);
        assert_eq!(compute_ttc(EgoFramePoint::new(10.0, 0.0), (0.0, 3.0), 10.0), 10.0);
        assert_eq!(compute_ttc(EgoFramePoint::new(0.0, 0.0), (-1.0, 0.0), 10.0), TTC_AT_CONTACT);
        // slow closing saturates at the horizon
        assert_eq!(compute_ttc(EgoFramePoint::new(50.0, 0.0), (-1.0, 0.0), 10.0), 10.0);
    }

    proptest! {
        #[test]
        fn ttc_in_range(x in -200.0..200.0f64, y in -200.0..200.0f64,
                        vx in -30.0..30.0f64, vy in -30.0..30.0f64, t_max in 0.5..20.0f64) {
            let t = compute_ttc(EgoFramePoint::new(x, y), (vx, vy), t_max);
            prop_assert!(t > 0.0 && t <= t_max);
        }

        #[test]
        fn ttc_scale_covariant(x in 1.0..50.0f64, y in -20.0..20.0f64,
                               vx in -10.0..-1.0f64, vy in -2.0..2.0f64, lambda in 0.2..5.0f64) {
            let p = EgoFramePoint::new(x, y);
            let t = compute_ttc(p, (vx, vy), 1e6);
            let ts = compute_ttc(EgoFramePoint::new(lambda * x, lambda * y), (lambda * vx, lambda * vy), 1e6);
            prop_assert!((t - ts).abs() <= 1e-9 * t.max(1.0));
        }

        #[test]
        fn velocity_reintegrates(pts in proptest::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 1..30)) {
            let t = track(&pts);
            let v = compute_velocity(&t);
            let (mut x, mut y) = (pts[0].0, pts[0].1);
            for k in 1..pts.len() {
                x += v[k].0 * t.dt();
                y += v[k].1 * t.dt();
                prop_assert!((x - pts[k].0).abs() < 1e-9 && (y - pts[k].1).abs() < 1e-9);
            }
        }
    }
}

