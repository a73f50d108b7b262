//! Shared fixtures for the criterion benches.

use pedrisk_core::config::RunConfig;
use pedrisk_core::features::{FeatureState, PedestrianTrack};
use pedrisk_core::pipeline::demo::{features, simulate, smooth};
use pedrisk_core::pipeline::Split;

pub struct Fixture {
    pub cfg: RunConfig,
    pub raw: Vec<PedestrianTrack>,
    pub tracks: Vec<PedestrianTrack>,
    pub states: Vec<FeatureState>,
}

/// A small training split, smoothed and featurized.
pub fn fixture(encounters: usize) -> Fixture {
    let cfg = RunConfig {
        train_encounters: encounters,
        ..RunConfig::default()
    };
    let raw: Vec<PedestrianTrack> = simulate(&cfg, Split::Train)
        .expect("simulation")
        .into_iter()
        .map(|e| e.track)
        .collect();
    let tracks = smooth(&cfg, &raw).expect("smoothing");
    let states = features(&cfg, &tracks).expect("features").states();
    Fixture { cfg, raw, tracks, states }
}
