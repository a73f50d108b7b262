//! Synthetic vehicle-pedestrian encounters.
//!
//! Each encounter starts with the ego vehicle at the world origin heading
//! along +x. The pedestrian start position is drawn in the ego frame at
//! t = 0, which coincides with the world frame, and the pedestrian then
//! follows one of four behavior archetypes. The ego-frame track is obtained
//! by transforming both world paths frame by frame.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::pose::{to_ego_frame, EgoPose};
use crate::error::{Error, Result};
use crate::features::{EgoFramePoint, PedestrianTrack};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    GoingStraight,
    TurningRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Behavior {
    /// Crosses in front of an approaching vehicle at close range.
    Cross,
    /// Crosses in front of a crawling vehicle, pausing mid-way.
    CrossWithHesitation,
    /// Walks away diagonally, well ahead of a slow vehicle.
    DriftAway,
    /// Walks in from the right, far ahead of a fast vehicle.
    ApproachFromRight,
}

impl Behavior {
    pub const ALL: [Behavior; 4] = [
        Behavior::Cross,
        Behavior::CrossWithHesitation,
        Behavior::DriftAway,
        Behavior::ApproachFromRight,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Behavior::Cross => "cross",
            Behavior::CrossWithHesitation => "hesitate",
            Behavior::DriftAway => "drift",
            Behavior::ApproachFromRight => "approach",
        }
    }
}

impl Scenario {
    pub fn tag(self) -> &'static str {
        match self {
            Scenario::GoingStraight => "straight",
            Scenario::TurningRight => "right",
        }
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Behavior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Behavior::ALL
            .into_iter()
            .find(|b| b.tag() == s)
            .ok_or_else(|| Error::invalid(format!("unknown behavior '{s}'")))
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "straight" => Ok(Scenario::GoingStraight),
            "right" => Ok(Scenario::TurningRight),
            _ => Err(Error::invalid(format!("unknown scenario '{s}'"))),
        }
    }
}

/// Closed interval sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
}

impl Span {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn fixed(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    fn sample(&self, rng: &mut rng::Rng) -> f64 {
        if self.hi > self.lo {
            rng.random_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }

    fn valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }
}

/// A constant-acceleration phase of the ego speed profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelSegment {
    pub duration: f64,
    pub accel: f64,
}

/// Ego speed over time: an initial speed followed by constant-acceleration
/// segments. Speed is held after the last segment and never drops below 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    pub initial: Span,
    pub segments: Vec<AccelSegment>,
}

impl SpeedProfile {
    /// Speed and travelled distance at time `t` from initial speed `v0`.
    fn state_at(&self, v0: f64, t: f64) -> (f64, f64) {
        let mut v = v0;
        let mut s = 0.0;
        let mut remaining = t;
        for seg in &self.segments {
            if remaining <= 0.0 {
                break;
            }
            let d = seg.duration.min(remaining);
            let (dv, ds) = advance(v, seg.accel, d);
            v = dv;
            s += ds;
            remaining -= d;
        }
        if remaining > 0.0 {
            s += v * remaining;
        }
        (v, s)
    }
}

/// Exact constant-acceleration step with the speed clamped at zero.
fn advance(v: f64, a: f64, d: f64) -> (f64, f64) {
    if a < 0.0 && v + a * d < 0.0 {
        let ts = -v / a;
        (0.0, v * ts + 0.5 * a * ts * ts)
    } else {
        (v + a * d, v * d + 0.5 * a * d * d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub behavior: Behavior,
    pub ego_speed: SpeedProfile,
    /// Arc radius used when turning right, meters.
    pub turn_radius: Span,
    pub ped_speed: Span,
    /// Pedestrian start position in the ego frame at t = 0.
    pub start_x: Span,
    pub start_y: Span,
    pub noise_sigma: f64,
    pub frame_rate: f64,
    pub duration: f64,
    pub rng_seed: u64,
}

impl ScenarioConfig {
    /// Default parameterization of each behavior archetype.
    ///
    /// The four presets occupy four separated regions of the
    /// (position, velocity, TTC) state space: near and closing fast (cross),
    /// near and barely closing (hesitate), far and receding (drift), far and
    /// closing fast (approach).
    pub fn preset(behavior: Behavior, scenario: Scenario) -> Self {
        let (ego_speed, ped_speed, start_x, start_y, duration) = match behavior {
            Behavior::Cross => (
                SpeedProfile {
                    initial: Span::new(2.6, 3.4),
                    segments: vec![],
                },
                Span::new(1.2, 1.6),
                Span::new(14.0, 17.0),
                Span::new(3.0, 4.5),
                4.0,
            ),
            Behavior::CrossWithHesitation => (
                SpeedProfile {
                    initial: Span::new(0.9, 1.2),
                    segments: vec![AccelSegment {
                        duration: 1.5,
                        accel: -0.2,
                    }],
                },
                Span::new(1.1, 1.4),
                Span::new(8.0, 10.0),
                Span::new(4.0, 5.5),
                4.0,
            ),
            Behavior::DriftAway => (
                SpeedProfile {
                    initial: Span::new(0.2, 0.5),
                    segments: vec![],
                },
                Span::new(1.2, 1.6),
                Span::new(20.0, 26.0),
                Span::new(3.0, 6.0),
                4.0,
            ),
            Behavior::ApproachFromRight => (
                SpeedProfile {
                    initial: Span::new(5.0, 6.0),
                    segments: vec![],
                },
                Span::new(1.3, 1.7),
                Span::new(36.0, 42.0),
                Span::new(-7.0, -5.0),
                3.5,
            ),
        };
        Self {
            scenario,
            behavior,
            ego_speed,
            turn_radius: Span::new(10.0, 15.0),
            ped_speed,
            start_x,
            start_y,
            noise_sigma: 0.05,
            frame_rate: 6.5,
            duration,
            rng_seed: 0,
        }
    }

    pub fn n_frames(&self) -> usize {
        (self.duration * self.frame_rate).floor() as usize + 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(format!("scenario config: {m}")));
        if !(self.frame_rate.is_finite() && self.frame_rate > 0.0) {
            return bad(format!("frame_rate must be positive, got {}", self.frame_rate));
        }
        if !(self.duration.is_finite() && self.duration * self.frame_rate >= 2.0) {
            return bad(format!(
                "duration {} s at {} Hz gives fewer than 2 frames",
                self.duration, self.frame_rate
            ));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        for (name, s) in [
            ("ego initial speed", self.ego_speed.initial),
            ("turn radius", self.turn_radius),
            ("pedestrian speed", self.ped_speed),
            ("start_x", self.start_x),
            ("start_y", self.start_y),
        ] {
            if !s.valid() {
                return bad(format!("{name} range [{}, {}] is invalid", s.lo, s.hi));
            }
        }
        if self.ego_speed.initial.lo < 0.0 || self.ped_speed.lo < 0.0 {
            return bad("speeds must be non-negative".into());
        }
        if self.scenario == Scenario::TurningRight && self.turn_radius.lo <= 0.0 {
            return bad("turn radius must be positive".into());
        }
        if self.ego_speed.segments.iter().any(|s| !(s.duration >= 0.0 && s.accel.is_finite())) {
            return bad("speed profile segments need non-negative durations".into());
        }
        Ok(())
    }
}

/// One simulated encounter with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEncounter {
    /// Ego-frame track with sensor noise.
    pub track: PedestrianTrack,
    /// Ego-frame track without noise.
    pub clean: PedestrianTrack,
    pub ego_path: Vec<EgoPose>,
    pub ped_path: Vec<(f64, f64)>,
    pub behavior: Behavior,
    pub scenario: Scenario,
}

/// Smooth speed multiplier that dips to zero for a pause.
#[derive(Debug, Clone, Copy)]
struct Pause {
    start: f64,
    hold: f64,
    ramp: f64,
}

impl Pause {
    fn factor(&self, t: f64) -> f64 {
        let a = self.start;
        let b = a + self.ramp;
        let c = b + self.hold;
        let d = c + self.ramp;
        let half_cos = |u: f64| 0.5 * (1.0 + (std::f64::consts::PI * u).cos());
        if t <= a || t >= d {
            1.0
        } else if t < b {
            half_cos((t - a) / self.ramp)
        } else if t <= c {
            0.0
        } else {
            1.0 - half_cos((t - c) / self.ramp)
        }
    }
}

const PED_SUBSTEPS: usize = 40;

/// Simulates one encounter. Fully determined by `config` including its seed.
pub fn simulate_encounter(config: &ScenarioConfig) -> Result<LabeledEncounter> {
    simulate_with_id(config, format!("{}-{}-{}", config.behavior, config.scenario, config.rng_seed))
}

pub(crate) fn simulate_with_id(config: &ScenarioConfig, id: String) -> Result<LabeledEncounter> {
    config.validate()?;
    let mut rng = rng::stream(config.rng_seed, "encounter", 0);

    let v0 = config.ego_speed.initial.sample(&mut rng);
    let radius = config.turn_radius.sample(&mut rng);
    let ped_speed = config.ped_speed.sample(&mut rng);
    let x0 = config.start_x.sample(&mut rng);
    let y0 = config.start_y.sample(&mut rng);
    // lateral direction of travel: towards and across the ego path
    let side = if y0 >= 0.0 { -1.0 } else { 1.0 };
    let (dir, pause) = match config.behavior {
        Behavior::Cross | Behavior::ApproachFromRight => ((0.0, side), None),
        Behavior::CrossWithHesitation => {
            let pause = Pause {
                start: rng.random_range(0.6..=1.2),
                hold: rng.random_range(0.8..=1.4),
                ramp: 0.4,
            };
            ((0.0, side), Some(pause))
        }
        Behavior::DriftAway => {
            let theta = rng.random_range(35.0f64..=60.0).to_radians();
            // away from the ego path on the side the pedestrian starts on
            ((theta.cos(), -side * theta.sin()), None)
        }
    };

    let n = config.n_frames();
    let dt = 1.0 / config.frame_rate;
    let mut ego_path = Vec::with_capacity(n);
    let mut ped_path = Vec::with_capacity(n);
    let mut ped = (x0, y0);
    let mut t_prev = 0.0;
    for k in 0..n {
        let t = k as f64 * dt;
        let (speed, s) = config.ego_speed.state_at(v0, t);
        let pose = match config.scenario {
            Scenario::GoingStraight => EgoPose::new(s, 0.0, 0.0, speed),
            Scenario::TurningRight => {
                let phi = s / radius;
                EgoPose::new(radius * phi.sin(), -radius * (1.0 - phi.cos()), -phi, speed)
            }
        };
        if k > 0 {
            let h = (t - t_prev) / PED_SUBSTEPS as f64;
            for j in 0..PED_SUBSTEPS {
                // midpoint rule on the speed multiplier
                let tm = t_prev + (j as f64 + 0.5) * h;
                let m = pause.map_or(1.0, |p| p.factor(tm));
                ped.0 += dir.0 * ped_speed * m * h;
                ped.1 += dir.1 * ped_speed * m * h;
            }
        }
        t_prev = t;
        ego_path.push(pose);
        ped_path.push(ped);
    }

    let clean_points: Vec<EgoFramePoint> = ego_path
        .iter()
        .zip(&ped_path)
        .map(|(pose, &w)| to_ego_frame(pose, w))
        .collect();
    let noise = Normal::new(0.0, config.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::invalid(format!("noise distribution: {e}")))?;
    let noisy_points: Vec<EgoFramePoint> = clean_points
        .iter()
        .map(|p| {
            if config.noise_sigma > 0.0 {
                EgoFramePoint::new(p.x + noise.sample(&mut rng), p.y + noise.sample(&mut rng))
            } else {
                *p
            }
        })
        .collect();

    Ok(LabeledEncounter {
        track: PedestrianTrack::new(id.clone(), config.frame_rate, noisy_points)?,
        clean: PedestrianTrack::new(id, config.frame_rate, clean_points)?,
        ego_path,
        ped_path,
        behavior: config.behavior,
        scenario: config.scenario,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(b: Behavior, s: Scenario) -> ScenarioConfig {
        let mut c = ScenarioConfig::preset(b, s);
        c.noise_sigma = 0.0;
        c.rng_seed = 11;
        c
    }

    #[test]
    fn drift_away_recedes_in_final_half() {
        for seed in 0..20 {
            let mut c = cfg(Behavior::DriftAway, Scenario::GoingStraight);
            c.rng_seed = seed;
            let e = simulate_encounter(&c).unwrap();
            let d: Vec<f64> = e.clean.points.iter().map(|p| p.norm()).collect();
            let half = d.len() / 2;
            for w in d[half..].windows(2) {
                assert!(w[1] >= w[0], "seed {seed}: {:?}", d);
            }
        }
    }

    #[test]
    fn straight_cross_is_laterally_monotone() {
        for seed in 0..20 {
            let mut c = cfg(Behavior::Cross, Scenario::GoingStraight);
            c.rng_seed = seed;
            let e = simulate_encounter(&c).unwrap();
            for w in e.clean.points.windows(2) {
                assert!(w[1].y < w[0].y);
            }
        }
    }

    #[test]
    fn deterministic_and_frame_consistent() {
        let c = ScenarioConfig::preset(Behavior::CrossWithHesitation, Scenario::TurningRight);
        let a = simulate_encounter(&c).unwrap();
        let b = simulate_encounter(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.track.len(), c.n_frames());
        assert_eq!(a.ego_path.len(), a.ped_path.len());
        assert_eq!(a.clean.len(), a.track.len());
        // noise is additive and small
        for (p, q) in a.track.points.iter().zip(&a.clean.points) {
            assert!((p.x - q.x).abs() < 0.5 && (p.y - q.y).abs() < 0.5);
        }
    }

    #[test]
    fn ego_turns_right() {
        let e = simulate_encounter(&cfg(Behavior::Cross, Scenario::TurningRight)).unwrap();
        let last = e.ego_path.last().unwrap();
        assert!(last.heading < 0.0);
        assert!(last.y_w < 0.0);
        for w in e.ego_path.windows(2) {
            assert!(w[1].heading <= w[0].heading);
        }
    }

    #[test]
    fn speed_profile_clamps_at_zero() {
        let p = SpeedProfile {
            initial: Span::fixed(2.0),
            segments: vec![AccelSegment {
                duration: 5.0,
                accel: -1.0,
            }],
        };
        let (v, s) = p.state_at(2.0, 10.0);
        assert_eq!(v, 0.0);
        assert!((s - 2.0).abs() < 1e-12);
        let (v, s) = p.state_at(2.0, 1.0);
        assert!((v - 1.0).abs() < 1e-12 && (s - 1.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = cfg(Behavior::Cross, Scenario::GoingStraight);
        c.frame_rate = 0.0;
        assert!(simulate_encounter(&c).is_err());
        let mut c = cfg(Behavior::Cross, Scenario::GoingStraight);
        c.duration = 0.1;
        assert!(simulate_encounter(&c).is_err());
        let mut c = cfg(Behavior::Cross, Scenario::GoingStraight);
        c.noise_sigma = -1.0;
        assert!(simulate_encounter(&c).is_err());
    }

    #[test]
    fn pause_factor_shape() {
        let p = Pause {
            start: 1.0,
            hold: 1.0,
            ramp: 0.5,
        };
        assert_eq!(p.factor(0.5), 1.0);
        assert!((p.factor(1.25) - 0.5).abs() < 1e-12);
        assert_eq!(p.factor(2.0), 0.0);
        assert_eq!(p.factor(4.0), 1.0);
    }
}
