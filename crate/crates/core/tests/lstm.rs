use pedrisk_core::features::{EgoFramePoint, PedestrianTrack};
use pedrisk_core::lstm::{evaluate_windows, summarize_windows, train, TrainConfig};
use pedrisk_core::rng;
use rand::Rng;

fn straight_tracks(n: usize, seed: u64) -> Vec<PedestrianTrack> {
    let mut r = rng::stream(seed, "straight", 0);
    (0..n)
        .map(|i| {
            let (x0, y0) = (r.random_range(8.0..25.0), r.random_range(-6.0..6.0));
            let (vx, vy) = (r.random_range(-2.0..0.5), r.random_range(-1.5..1.5));
            let pts = (0..16)
                .map(|k| {
                    let t = k as f64 / 6.5;
                    EgoFramePoint::new(x0 + vx * t, y0 + vy * t)
                })
                .collect();
            PedestrianTrack::new(format!("s{i}"), 6.5, pts).unwrap()
        })
        .collect()
}

fn small_config() -> TrainConfig {
    TrainConfig {
        hidden_dim: 16,
        epochs: 600,
        learning_rate: 0.01,
        seed: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn constant_velocity_motion_is_learned() {
    let cfg = small_config();
    // a few hundred distinct velocities are needed before the fit generalizes
    let out = train(&straight_tracks(200, 1), &cfg).unwrap();
    assert!(out.history.last().unwrap() < &out.history[0]);
    let held_out = straight_tracks(10, 2);
    let s = summarize_windows(&evaluate_windows(&out.model, &held_out, cfg.t_pred).unwrap());
    // the extrapolation oracle is exact on these tracks
    assert!(s.baseline_ade < 1e-9);
    assert!(s.ade < 0.05, "ADE {}", s.ade);
}

#[test]
fn training_is_deterministic() {
    let cfg = TrainConfig { epochs: 3, ..small_config() };
    let tracks = straight_tracks(12, 3);
    let a = train(&tracks, &cfg).unwrap();
    let b = train(&tracks, &cfg).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.history, b.history);
    let c = train(&tracks, &TrainConfig { seed: 6, ..cfg }).unwrap();
    assert_ne!(a.model, c.model);
}

#[test]
fn rejects_too_few_trajectories() {
    let cfg = small_config();
    assert!(train(&straight_tracks(1, 4), &cfg).is_err());
    let short = PedestrianTrack::new("x", 6.5, vec![EgoFramePoint::new(1.0, 1.0); 8]).unwrap();
    assert!(train(&[short.clone(), short], &cfg).is_err());
}
