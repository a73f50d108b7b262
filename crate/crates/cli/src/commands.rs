use std::path::Path;

use pedrisk_core::cluster::{
    assign_semantic_labels, cluster_profiles, compare_methods, select_k, spectral_cluster, variant_matrix,
    ClusterMethod, ClusterModel, RiskLabel, SpectralParams,
};
use pedrisk_core::config::RunConfig;
use pedrisk_core::features::{FeatureState, PedestrianTrack};
use pedrisk_core::io::{
    load_model, read_features_csv, read_tracks_csv, save_model, write_assignments_csv, write_criteria_csv,
    write_features_csv, write_table_csv, write_text, write_tracks_csv, FeatureTable,
};
use pedrisk_core::kernel::KernelKind;
use pedrisk_core::lstm::{predict_window, sweep_prediction_window, LstmModel};
use pedrisk_core::pipeline::demo::{features, simulate, smooth, train_predictor};
use pedrisk_core::pipeline::{
    end_to_end_evaluate, manifest_text_for, run_demo, spliced_states, sweep_rows, write_report, Split, SWEEP_HEADER,
};
use pedrisk_core::rng::derive_seed;
use pedrisk_core::standardize::Standardizer;
use pedrisk_core::svm::{cross_validate, svm_train_multiclass, SvmModel};
use pedrisk_core::{Error, Result};

use crate::{manifest_path, Command};

type Extra = Vec<(String, String)>;

fn kv(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

fn path_kv(k: &str, p: &Path) -> (String, String) {
    kv(k, p.display())
}

fn manifest(command: &Command, cfg: &RunConfig, out: &Path, is_dir: bool, extra: Extra) -> Result<()> {
    write_text(&manifest_path(out, is_dir), &manifest_text_for(command.name(), cfg, &extra))
}

fn load_tracks(cfg: &RunConfig, path: &Path, no_smooth: bool) -> Result<Vec<PedestrianTrack>> {
    let tracks = read_tracks_csv(path, cfg.frame_rate)?;
    if tracks.is_empty() {
        return Err(Error::InvalidInput(format!("{} holds no trajectories", path.display())));
    }
    if no_smooth {
        Ok(tracks)
    } else {
        smooth(cfg, &tracks)
    }
}

fn load_states(path: &Path) -> Result<(FeatureTable, Vec<FeatureState>)> {
    let table = read_features_csv(path)?;
    let states = table.dataset.states();
    if states.is_empty() {
        return Err(Error::InvalidInput(format!("{} holds no feature rows", path.display())));
    }
    Ok((table, states))
}

pub fn run(command: &Command, cfg: &RunConfig) -> Result<()> {
    match command {
        Command::Generate { out, split } => {
            let split = match split.as_str() {
                "train" => Split::Train,
                "test" => Split::Test,
                other => return Err(Error::InvalidInput(format!("unknown split '{other}' (expected train or test)"))),
            };
            let enc = simulate(cfg, split)?;
            let tracks: Vec<PedestrianTrack> = enc.iter().map(|e| e.track.clone()).collect();
            write_tracks_csv(&out.join("tracks.csv"), &tracks)?;
            let rows: Vec<Vec<String>> = enc
                .iter()
                .map(|e| vec![e.track.id.clone(), e.behavior.to_string(), e.scenario.to_string()])
                .collect();
            write_table_csv(&out.join("encounters.csv"), &["traj_id", "behavior", "scenario"], &rows)?;
            manifest(command, cfg, out, true, vec![kv("trajectories", tracks.len())])
        }
        Command::Features { tracks, out, no_smooth } => {
            let t = load_tracks(cfg, tracks, *no_smooth)?;
            let ds = features(cfg, &t)?;
            write_features_csv(out, &FeatureTable::new(ds))?;
            manifest(command, cfg, out, false, vec![path_kv("tracks", tracks), kv("smoothed", !no_smooth)])
        }
        Command::TrainPredictor { tracks, out, no_smooth } => {
            let t = load_tracks(cfg, tracks, *no_smooth)?;
            let trained = train_predictor(cfg, &t)?;
            save_model(out, &trained.model)?;
            let loss: String = trained
                .history
                .iter()
                .enumerate()
                .map(|(e, l)| format!("{},{l}\n", e + 1))
                .collect();
            write_text(&out.with_extension("loss.csv"), &format!("epoch,loss\n{loss}"))?;
            let last = trained.history.last().copied().unwrap_or(f64::NAN);
            manifest(command, cfg, out, false, vec![path_kv("tracks", tracks), kv("final_loss", last)])
        }
        Command::SweepWindow { tracks, out, no_smooth } => {
            let t = load_tracks(cfg, tracks, *no_smooth)?;
            let rows = sweep_prediction_window(
                &t,
                cfg.sweep_t_min..=cfg.sweep_t_max,
                &cfg.train_config(),
                cfg.cv_folds,
                cfg.cv_repeats,
                derive_seed(cfg.seed, "sweep-folds", 0),
            )?;
            write_table_csv(out, &SWEEP_HEADER, &sweep_rows(&rows))?;
            manifest(command, cfg, out, false, vec![path_kv("tracks", tracks)])
        }
        Command::Cluster { features, out, method } => {
            let method: ClusterMethod = match method {
                Some(m) => m.parse()?,
                None => cfg.cluster_method,
            };
            let (table, states) = load_states(features)?;
            let seed = derive_seed(cfg.seed, "cluster-fit", 0);
            let (assignment, risks, extra) = match method {
                ClusterMethod::KpcaKmc => {
                    let fit = ClusterModel::fit(&states, cfg.k, &cfg.cluster_settings(), seed)?;
                    let model = match &cfg.label_map {
                        Some(map) => fit.model.with_labels(map.clone())?,
                        None => fit.model,
                    };
                    let risks = model
                        .labels
                        .as_ref()
                        .map(|l| fit.assignment.iter().map(|&c| l[c]).collect::<Vec<RiskLabel>>());
                    save_model(&out.join("cluster.json"), &model)?;
                    (fit.assignment, risks, vec![kv("kpca_dims", model.kpca.dims)])
                }
                ClusterMethod::Spectral => {
                    if states.len() > cfg.max_fit_rows {
                        return Err(Error::InvalidInput(format!(
                            "spectral clustering is limited to max_fit_rows = {} rows, the input has {}",
                            cfg.max_fit_rows,
                            states.len()
                        )));
                    }
                    let raw = variant_matrix(&states, cfg.variant);
                    let points = if cfg.standardize { Standardizer::fit(&raw)?.apply(&raw) } else { raw };
                    let mut params = SpectralParams::new(cfg.k);
                    params.k_nn = cfg.k_nn;
                    params.sigma = cfg.spectral_sigma;
                    params.laplacian = cfg.laplacian;
                    params.restarts = cfg.restarts;
                    let res = spectral_cluster(&points, &params, seed)?;
                    let labels = match &cfg.label_map {
                        Some(map) => Some(map.clone()),
                        None if cfg.k == 4 => {
                            Some(assign_semantic_labels(&cluster_profiles(&states, &res.assignment, cfg.k))?)
                        }
                        None => None,
                    };
                    let risks = labels.map(|l| res.assignment.iter().map(|&c| l[c]).collect());
                    let eig = res.eigenvalues.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
                    let extra = vec![kv("sigma", res.sigma), kv("eigengap_k", res.eigengap_k), kv("laplacian_eigenvalues", eig)];
                    (res.assignment, risks, extra)
                }
            };
            let profiles = cluster_profiles(&states, &assignment, cfg.k);
            let rows: Vec<Vec<String>> = profiles
                .iter()
                .enumerate()
                .map(|(c, p)| {
                    let risk = risks
                        .as_ref()
                        .and_then(|r| assignment.iter().position(|&a| a == c).map(|i| r[i].to_string()))
                        .unwrap_or_default();
                    vec![
                        c.to_string(),
                        p.size.to_string(),
                        p.px.to_string(),
                        p.py.to_string(),
                        p.vx.to_string(),
                        p.vy.to_string(),
                        p.ttc.to_string(),
                        risk,
                    ]
                })
                .collect();
            write_table_csv(
                &out.join("profiles.csv"),
                &["cluster", "size", "px", "py", "vx", "vy", "ttc", "risk"],
                &rows,
            )?;
            write_assignments_csv(&out.join("assignments.csv"), &table.dataset, &assignment, risks.as_deref())?;
            write_features_csv(
                &out.join("features_labeled.csv"),
                &FeatureTable {
                    dataset: table.dataset.clone(),
                    clusters: Some(assignment.clone()),
                    risks,
                },
            )?;
            let mut all = vec![path_kv("features", features), kv("method", method)];
            all.extend(extra);
            manifest(command, cfg, out, true, all)
        }
        Command::SelectK { features, out, k_min, k_max, method } => {
            let method: ClusterMethod = match method {
                Some(m) => m.parse()?,
                None => cfg.cluster_method,
            };
            let (lo, hi) = (k_min.unwrap_or(cfg.k_min), k_max.unwrap_or(cfg.k_max));
            if lo < 2 || lo > hi {
                return Err(Error::InvalidInput(format!("need 2 <= k_min <= k_max, got {lo}..{hi}")));
            }
            let (_, states) = load_states(features)?;
            let raw = variant_matrix(&states, cfg.variant);
            let sel = select_k(&raw, lo..=hi, method, &cfg.cluster_settings(), derive_seed(cfg.seed, "select-k", 0))?;
            write_criteria_csv(out, &sel.table)?;
            manifest(
                command,
                cfg,
                out,
                false,
                vec![path_kv("features", features), kv("method", method), kv("selected_k", sel.k)],
            )
        }
        Command::CompareMethods { features, out, k } => {
            let k = k.unwrap_or(cfg.k);
            let (_, states) = load_states(features)?;
            let raw = variant_matrix(&states, cfg.variant);
            let c = compare_methods(&raw, k, &cfg.cluster_settings(), derive_seed(cfg.seed, "compare", 0))?;
            let eig = c.laplacian_eigenvalues.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
            let text = format!(
                "k={}\nkpca_kmc_silhouette={}\nspectral_silhouette={}\nchosen={}\neigengap_k={}\nlaplacian_eigenvalues={eig}\n",
                c.k, c.kpca_silhouette, c.spectral_silhouette, c.chosen, c.eigengap_k
            );
            write_text(out, &text)?;
            manifest(command, cfg, out, false, vec![path_kv("features", features)])
        }
        Command::TrainClassifier { features, out, cv_out, kernels } => {
            let (table, states) = load_states(features)?;
            let risks = table.risks.ok_or_else(|| {
                Error::InvalidInput(format!("{} has no risk column; run `cluster` first", features.display()))
            })?;
            let model = svm_train_multiclass(&states, &risks, &cfg.svm_settings())?;
            save_model(out, &model)?;
            let mut extra = vec![path_kv("features", features), kv("support_vectors", model.n_support_vectors())];
            if let Some(cv) = cv_out {
                let kinds: Vec<KernelKind> = match kernels.as_deref() {
                    None => vec![cfg.svm_kernel],
                    Some("all") => KernelKind::ALL.to_vec(),
                    Some(list) => list.split(',').map(|s| s.trim().parse()).collect::<Result<_>>()?,
                };
                let mut rows = Vec::new();
                for kind in kinds {
                    let mut settings = cfg.svm_settings();
                    settings.kernel = kind;
                    let folds = cross_validate(&states, &risks, &settings, cfg.svm_folds, derive_seed(cfg.seed, "svm-cv", 0))?;
                    for f in folds {
                        rows.push(vec![
                            kind.to_string(),
                            cfg.variant.to_string(),
                            f.fold.to_string(),
                            f.accuracy.to_string(),
                            f.preds_per_sec.round().to_string(),
                        ]);
                    }
                }
                write_table_csv(cv, &["kernel", "variant", "fold", "accuracy", "preds_per_sec"], &rows)?;
                extra.push(path_kv("cv_out", cv));
            }
            manifest(command, cfg, out, false, extra)
        }
        Command::Predict { lstm, classifier, tracks, out, observe, no_smooth } => {
            let lstm_model: LstmModel = load_model(lstm)?;
            let clf: SvmModel = load_model(classifier)?;
            let t = load_tracks(cfg, tracks, *no_smooth)?;
            let mut rows = Vec::new();
            for track in &t {
                let n = observe.unwrap_or(track.len());
                if n > track.len() || n < pedrisk_core::lstm::MIN_OBSERVED {
                    return Err(Error::InvalidInput(format!(
                        "trajectory {} has {} frames; cannot observe {n}",
                        track.id,
                        track.len()
                    )));
                }
                let observed = &track.points[..n];
                let future = predict_window(&lstm_model, observed, cfg.t_pred)?;
                let states = spliced_states(observed, &future, track.frame_rate, cfg.t_max)?;
                for (k, (p, s)) in future.iter().zip(&states).enumerate() {
                    rows.push(vec![
                        track.id.clone(),
                        n.to_string(),
                        (k + 1).to_string(),
                        p.x.to_string(),
                        p.y.to_string(),
                        clf.predict(s).to_string(),
                    ]);
                }
            }
            write_table_csv(out, &["traj_id", "t", "step", "x_m", "y_m", "risk"], &rows)?;
            manifest(
                command,
                cfg,
                out,
                false,
                vec![path_kv("lstm", lstm), path_kv("classifier", classifier), path_kv("tracks", tracks)],
            )
        }
        Command::Evaluate { out, lstm, classifier, tracks, no_smooth } => match (lstm, classifier, tracks) {
            (Some(lstm), Some(classifier), Some(tracks)) => {
                let lstm_model: LstmModel = load_model(lstm)?;
                let clf: SvmModel = load_model(classifier)?;
                let t = load_tracks(cfg, tracks, *no_smooth)?;
                let report = end_to_end_evaluate(&lstm_model, &clf, &t, cfg.t_pred, cfg.t_max)?;
                write_report(out, &report, None, &[])?;
                manifest(
                    command,
                    cfg,
                    out,
                    true,
                    vec![path_kv("lstm", lstm), path_kv("classifier", classifier), path_kv("tracks", tracks)],
                )
            }
            _ => run_demo(cfg, out).map(|_| ()),
        },
    }
}
