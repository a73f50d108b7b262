use std::sync::OnceLock;

use pedrisk_core::cluster::RiskLabel;
use pedrisk_core::config::RunConfig;
use pedrisk_core::features::PedestrianTrack;
use pedrisk_core::lstm::{window_prefixes, LstmModel};
use pedrisk_core::pipeline::demo::{features, fit_labeler, simulate, smooth, train_classifier, train_predictor};
use pedrisk_core::pipeline::{
    actual_risk_sequence, confusion, end_to_end_evaluate, predict_risk_sequence, spliced_states, Split,
};
use pedrisk_core::sim::{Behavior, LabeledEncounter};
use pedrisk_core::svm::SvmModel;

struct Fixture {
    cfg: RunConfig,
    lstm: LstmModel,
    clf: SvmModel,
    test: Vec<LabeledEncounter>,
    test_smooth: Vec<PedestrianTrack>,
}

fn small_config(variant: &str) -> RunConfig {
    let mut cfg = RunConfig::default();
    for (k, v) in [("train_encounters", "15"), ("test_encounters", "4"), ("epochs", "120"), ("seed", "3"), ("variant", variant)] {
        cfg.set(k, v).unwrap();
    }
    cfg
}

fn build(cfg: RunConfig) -> Fixture {
    let train: Vec<_> = simulate(&cfg, Split::Train).unwrap().into_iter().map(|e| e.track).collect();
    let train_smooth = smooth(&cfg, &train).unwrap();
    let states = features(&cfg, &train_smooth).unwrap().states();
    let labeling = fit_labeler(&cfg, &states).unwrap();
    let clf = train_classifier(&cfg, &states, &labeling.risks).unwrap();
    let lstm = train_predictor(&cfg, &train_smooth).unwrap().model;
    let test = simulate(&cfg, Split::Test).unwrap();
    let raw: Vec<_> = test.iter().map(|e| e.track.clone()).collect();
    let test_smooth = smooth(&cfg, &raw).unwrap();
    Fixture {
        cfg,
        lstm,
        clf,
        test,
        test_smooth,
    }
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| build(small_config("all")))
}

#[test]
fn sequences_have_horizon_length_and_repeat() {
    let f = fixture();
    let track = &f.test_smooth[0];
    let prefix = track.prefix(6);
    let a = predict_risk_sequence(&f.lstm, &f.clf, &prefix, f.cfg.t_pred, f.cfg.t_max).unwrap();
    assert_eq!(a.labels.len(), 5);
    assert_eq!(a.t, 6);
    assert_eq!(a, predict_risk_sequence(&f.lstm, &f.clf, &prefix, f.cfg.t_pred, f.cfg.t_max).unwrap());
    assert!(predict_risk_sequence(&f.lstm, &f.clf, &track.prefix(3), 5, 10.0).is_err());
}

#[test]
fn true_future_reproduces_actual_sequence() {
    let f = fixture();
    for track in f.test_smooth.iter().take(6) {
        for t in window_prefixes(track.len(), 5) {
            let states = spliced_states(&track.points[..t], &track.points[t..t + 5], track.frame_rate, 10.0).unwrap();
            let labels: Vec<RiskLabel> = states.iter().map(|s| f.clf.predict(s)).collect();
            let actual = actual_risk_sequence(&f.clf, track, t, 5, 10.0).unwrap();
            assert_eq!(labels, actual.labels);
        }
    }
}

#[test]
fn actual_sequence_labels_each_true_state() {
    let f = fixture();
    let track = &f.test_smooth[1];
    let all = pedrisk_core::features::build_feature_states(track, 10.0).unwrap();
    let last = track.len() - 5;
    let seq = actual_risk_sequence(&f.clf, track, last, 5, 10.0).unwrap();
    for (k, l) in seq.labels.iter().enumerate() {
        assert_eq!(*l, f.clf.predict(&all[last + k]));
    }
    assert!(actual_risk_sequence(&f.clf, track, last + 1, 5, 10.0).is_err());
}

#[test]
fn report_counts_every_window() {
    let f = fixture();
    let report = end_to_end_evaluate(&f.lstm, &f.clf, &f.test_smooth, 5, 10.0).unwrap();
    let expected: usize = f.test_smooth.iter().map(|t| t.len().saturating_sub(4 + 5 - 1)).sum();
    assert_eq!(report.windows.len(), expected);
    assert_eq!(report.confusion.total() as usize, expected * 5);
    let (p, a): (Vec<_>, Vec<_>) = report.windows.iter().map(|w| (w.predicted.clone(), w.actual.clone())).unzip();
    let m = confusion(&p, &a).unwrap();
    for l in RiskLabel::ALL {
        let actual = a.iter().flat_map(|s| &s.labels).filter(|&&x| x == l).count() as u64;
        let predicted = p.iter().flat_map(|s| &s.labels).filter(|&&x| x == l).count() as u64;
        assert_eq!(m.col_sums()[l.index()], actual);
        assert_eq!(m.row_sums()[l.index()], predicted);
    }
    assert!(report.accuracy() >= 0.8, "accuracy {}", report.accuracy());
    assert_eq!(report.ade.len(), 5);
}

#[test]
fn drifting_pedestrians_stay_safe() {
    let f = fixture();
    for (e, track) in f.test.iter().zip(&f.test_smooth) {
        if e.behavior != Behavior::DriftAway {
            continue;
        }
        let prefix = track.prefix(track.len() - 5);
        let seq = predict_risk_sequence(&f.lstm, &f.clf, &prefix, 5, 10.0).unwrap();
        assert!(
            seq.labels.iter().all(|l| matches!(l, RiskLabel::IndependentlySafe | RiskLabel::JointlySafe)),
            "{} {:?}",
            track.id,
            seq.labels
        );
    }
}

#[test]
fn ttc_only_classifier_is_no_better_on_crossings() {
    let all = fixture();
    let ttc = build(small_config("ttc"));
    let crossing = |f: &Fixture| {
        let tracks: Vec<PedestrianTrack> = f
            .test
            .iter()
            .zip(&f.test_smooth)
            .filter(|(e, _)| matches!(e.behavior, Behavior::Cross | Behavior::CrossWithHesitation))
            .map(|(_, t)| t.clone())
            .collect();
        end_to_end_evaluate(&f.lstm, &f.clf, &tracks, 5, 10.0).unwrap().accuracy()
    };
    let (a, t) = (crossing(all), crossing(&ttc));
    assert!(t <= a, "ttc {t} vs all {a}");
}
