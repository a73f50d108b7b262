//! The whole chain driven by a [`RunConfig`]: simulate, smooth, extract
//! features, cluster and name risk levels, train the classifier and the
//! predictor, then evaluate on held-out encounters.

use std::path::Path;

use crate::cluster::{ClusterModel, RiskLabel};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::features::{FeatureDataset, FeatureState, PedestrianTrack};
use crate::io::{save_model, write_features_csv, write_text, write_tracks_csv, FeatureTable};
use crate::lstm::{train, LstmModel, TrainOutcome};
use crate::rng;
use crate::sim::{generate_dataset, smooth_tracks, LabeledEncounter};
use crate::svm::{svm_train_multiclass, SvmModel};

use super::report::{end_to_end_evaluate, write_report, EvaluationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn tag(self) -> &'static str {
        match self {
            Split::Train => "train-data",
            Split::Test => "test-data",
        }
    }
}

/// Simulated encounters of one split; the two splits use unrelated seeds.
pub fn simulate(cfg: &RunConfig, split: Split) -> Result<Vec<LabeledEncounter>> {
    let count = match split {
        Split::Train => cfg.train_encounters,
        Split::Test => cfg.test_encounters,
    };
    generate_dataset(&cfg.scenario_configs(), count, rng::derive_seed(cfg.seed, split.tag(), 0))
}

pub fn smooth(cfg: &RunConfig, tracks: &[PedestrianTrack]) -> Result<Vec<PedestrianTrack>> {
    smooth_tracks(tracks, &cfg.lowess())
}

pub fn features(cfg: &RunConfig, smoothed: &[PedestrianTrack]) -> Result<FeatureDataset> {
    FeatureDataset::from_tracks(smoothed, cfg.t_max)
}

/// Clustered training states with a risk label per state.
#[derive(Debug, Clone)]
pub struct Labeling {
    pub model: ClusterModel,
    pub assignment: Vec<usize>,
    pub risks: Vec<RiskLabel>,
}

/// Fits the deployed labeler (kernel PCA + k-means) with `k` clusters and
/// names them by the configured label map or the semantic rule.
pub fn fit_labeler(cfg: &RunConfig, states: &[FeatureState]) -> Result<Labeling> {
    let fit = ClusterModel::fit(states, cfg.k, &cfg.cluster_settings(), rng::derive_seed(cfg.seed, "cluster-fit", 0))?;
    let model = match &cfg.label_map {
        Some(map) => fit.model.with_labels(map.clone())?,
        None => fit.model,
    };
    if model.labels.is_none() {
        return Err(Error::invalid(format!(
            "risk levels need k = 4 or an explicit label_map (k = {})",
            cfg.k
        )));
    }
    let risks = fit
        .assignment
        .iter()
        .map(|&c| model.label_of(c))
        .collect::<Result<Vec<_>>>()?;
    Ok(Labeling {
        model,
        assignment: fit.assignment,
        risks,
    })
}

pub fn train_classifier(cfg: &RunConfig, states: &[FeatureState], risks: &[RiskLabel]) -> Result<SvmModel> {
    svm_train_multiclass(states, risks, &cfg.svm_settings())
}

pub fn train_predictor(cfg: &RunConfig, smoothed: &[PedestrianTrack]) -> Result<TrainOutcome> {
    train(smoothed, &cfg.train_config())
}

/// Models and evaluation of one demo run.
#[derive(Debug, Clone)]
pub struct DemoOutcome {
    pub labeling: Labeling,
    pub classifier: SvmModel,
    pub predictor: LstmModel,
    pub loss_history: Vec<f64>,
    pub report: EvaluationReport,
    pub test_encounters: Vec<LabeledEncounter>,
}

/// Key=value manifest echoing the command and the effective configuration.
pub fn manifest_text_for(command: &str, cfg: &RunConfig, extra: &[(String, String)]) -> String {
    let mut s = format!(
        "# pedrisk {} manifest\ncommand = {command}\n",
        env!("CARGO_PKG_VERSION")
    );
    for (k, v) in extra {
        s.push_str(&format!("{k} = {v}\n"));
    }
    s.push_str(&cfg.to_text());
    s
}

/// Runs the full chain and writes every artifact under `out`:
/// `data/` (tracks and labeled training features), `models/`, the report
/// files (`confusion.csv`, `ade_sweep.csv`, `risk_timeline.csv`,
/// `summary.txt`) and `manifest.txt`. Identical configurations give byte-identical files.
pub fn run_demo(cfg: &RunConfig, out: &Path) -> Result<DemoOutcome> {
    cfg.validate()?;
    let train_enc = simulate(cfg, Split::Train)?;
    let test_enc = simulate(cfg, Split::Test)?;
    let train_raw: Vec<PedestrianTrack> = train_enc.iter().map(|e| e.track.clone()).collect();
    let test_raw: Vec<PedestrianTrack> = test_enc.iter().map(|e| e.track.clone()).collect();
    let train_smooth = smooth(cfg, &train_raw)?;
    let test_smooth = smooth(cfg, &test_raw)?;

    let ds = features(cfg, &train_smooth)?;
    let states = ds.states();
    let labeling = fit_labeler(cfg, &states)?;
    let classifier = train_classifier(cfg, &states, &labeling.risks)?;
    let trained = train_predictor(cfg, &train_smooth)?;
    let report = end_to_end_evaluate(&trained.model, &classifier, &test_smooth, cfg.t_pred, cfg.t_max)?;

    let data = out.join("data");
    write_tracks_csv(&data.join("train_tracks.csv"), &train_raw)?;
    write_tracks_csv(&data.join("test_tracks.csv"), &test_raw)?;
    write_features_csv(
        &data.join("train_features.csv"),
        &FeatureTable {
            dataset: ds,
            clusters: Some(labeling.assignment.clone()),
            risks: Some(labeling.risks.clone()),
        },
    )?;
    let models = out.join("models");
    save_model(&models.join("lstm.json"), &trained.model)?;
    save_model(&models.join("cluster.json"), &labeling.model)?;
    save_model(&models.join("svm.json"), &classifier)?;
    let loss: String = trained
        .history
        .iter()
        .enumerate()
        .map(|(e, l)| format!("{},{l}\n", e + 1))
        .collect();
    write_text(&models.join("lstm_loss.csv"), &format!("epoch,loss\n{loss}"))?;
    let extra = vec![
        ("train_states".to_string(), states.len().to_string()),
        ("test_trajectories".to_string(), test_smooth.len().to_string()),
    ];
    write_report(out, &report, None, &extra)?;
    write_text(&out.join("manifest.txt"), &manifest_text_for("evaluate", cfg, &[]))?;

    Ok(DemoOutcome {
        labeling,
        classifier,
        predictor: trained.model,
        loss_history: trained.history,
        report,
        test_encounters: test_enc,
    })
}
