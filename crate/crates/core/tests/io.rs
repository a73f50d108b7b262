use std::path::Path;

use pedrisk_core::cluster::{ClusterModel, ClusterSettings, RiskLabel};
use pedrisk_core::features::{EgoFramePoint, FeatureDataset, PedestrianTrack};
use pedrisk_core::io::*;
use pedrisk_core::lstm::LstmModel;
use pedrisk_core::sim::{default_scenario_set, generate_dataset};
use pedrisk_core::svm::{svm_train_multiclass, SvmModel, SvmSettings};
use pedrisk_core::Error;

fn data_line(path: &Path, text: &str) -> u64 {
    std::fs::write(path, text).unwrap();
    match read_tracks_csv(path, 6.5) {
        Err(Error::Data { line, .. }) => line,
        other => panic!("{text:?} gave {other:?}"),
    }
}

#[test]
fn malformed_tracks_report_lines() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.csv");
    let head = "traj_id,frame,x_m,y_m\n";
    assert_eq!(data_line(&p, "id,frame,x,y\n"), 1);
    assert_eq!(data_line(&p, &format!("{head}a,0,1,2\na,1,1,zz\n")), 3);
    assert_eq!(data_line(&p, &format!("{head}a,0,1,2\na,2,1,2\n")), 3);
    assert_eq!(data_line(&p, &format!("{head}a,1,1,2\n")), 2);
    assert_eq!(data_line(&p, &format!("{head}a,0,1,2\nb,0,1,2\na,1,1,2\n")), 4);
    assert_eq!(data_line(&p, &format!("{head}a,0,1\n")), 2);
    assert_eq!(data_line(&p, &format!("{head}a,0,1,inf\n")), 2);
    assert!(matches!(read_tracks_csv(&dir.path().join("missing.csv"), 6.5), Err(Error::Io { .. })));
}

#[test]
fn tracks_and_features_read_back_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let enc = generate_dataset(&default_scenario_set(), 2, 4).unwrap();
    let tracks: Vec<PedestrianTrack> = enc.into_iter().map(|e| e.track).collect();
    let p = dir.path().join("sub/tracks.csv");
    write_tracks_csv(&p, &tracks).unwrap();
    assert_eq!(read_tracks_csv(&p, 6.5).unwrap(), tracks);

    let ds = FeatureDataset::from_tracks(&tracks, 10.0).unwrap();
    let n = ds.n_rows();
    let table = FeatureTable {
        dataset: ds,
        clusters: Some((0..n).map(|i| i % 4).collect()),
        risks: Some((0..n).map(|i| RiskLabel::ALL[i % 4]).collect()),
    };
    let f = dir.path().join("features.csv");
    write_features_csv(&f, &table).unwrap();
    assert_eq!(read_features_csv(&f).unwrap(), table);
    let plain = FeatureTable::new(table.dataset.clone());
    write_features_csv(&f, &plain).unwrap();
    assert_eq!(read_features_csv(&f).unwrap(), plain);
}

#[test]
fn bad_risk_label_is_located() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.csv");
    std::fs::write(&p, "traj_id,frame,px,py,vx,vy,ttc,risk\na,0,1,2,0,0,10,alert\na,1,1,2,0,0,10,scary\n").unwrap();
    match read_features_csv(&p) {
        Err(Error::Data { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn models_round_trip_through_envelope() {
    let enc = generate_dataset(&default_scenario_set(), 3, 8).unwrap();
    let tracks: Vec<PedestrianTrack> = enc.into_iter().map(|e| e.track).collect();
    let states = FeatureDataset::from_tracks(&tracks, 10.0).unwrap().states();
    let cluster = ClusterModel::fit(&states, 4, &ClusterSettings::default(), 2).unwrap();
    let risks: Vec<RiskLabel> = cluster.assignment.iter().map(|&c| cluster.model.label_of(c).unwrap()).collect();
    let svm = svm_train_multiclass(&states, &risks, &SvmSettings::default()).unwrap();
    let lstm = LstmModel::init(6, 3).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.json");
    save_model(&p, &cluster.model).unwrap();
    assert_eq!(load_model::<ClusterModel>(&p).unwrap(), cluster.model);
    assert!(matches!(load_model::<SvmModel>(&p), Err(Error::Format(_))));
    save_model(&p, &svm).unwrap();
    let back: SvmModel = load_model(&p).unwrap();
    assert_eq!(back, svm);
    assert_eq!(back.predict_all(&states), svm.predict_all(&states));
    save_model(&p, &lstm).unwrap();
    assert_eq!(load_model::<LstmModel>(&p).unwrap(), lstm);
    // saving the loaded model reproduces the file
    let first = std::fs::read(&p).unwrap();
    save_model(&p, &load_model::<LstmModel>(&p).unwrap()).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), first);

    let json = model_to_json(&lstm).unwrap();
    assert!(model_from_json::<LstmModel>(&json.replace("\"version\": 1", "\"version\": 2")).is_err());
    assert!(model_from_json::<LstmModel>(&json.replace("pedrisk-model", "other")).is_err());
    assert!(model_from_json::<LstmModel>("{").is_err());
}

#[test]
fn track_point_validation_applies_on_read() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.csv");
    let t = PedestrianTrack::new("a", 6.5, vec![EgoFramePoint::new(1.0, 2.0); 3]).unwrap();
    write_tracks_csv(&p, &[t]).unwrap();
    assert_eq!(
        std::fs::read_to_string(&p).unwrap(),
        "traj_id,frame,x_m,y_m\na,0,1,2\na,1,1,2\na,2,1,2\n"
    );
    assert_eq!(data_line(&p, "traj_id,frame,x_m,y_m\na,0,1000,2\n"), 2);
}
