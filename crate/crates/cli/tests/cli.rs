use std::path::Path;
use std::process::{Command, Output};

const SMALL: [&str; 6] = ["--set", "train_encounters=6", "--set", "test_encounters=2", "--set", "epochs=10"];

fn pedrisk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pedrisk")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = pedrisk(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let mut args = vec!["generate", "--out", s(d)];
        args.extend(SMALL);
        ok(&args);
    }
    for f in ["tracks.csv", "encounters.csv", "manifest.txt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn select_k_writes_one_row_per_k() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let feats = dir.path().join("f.csv");
    let crit = dir.path().join("k.csv");
    let mut args = vec!["generate", "--out", s(&gen)];
    args.extend(SMALL);
    ok(&args);
    ok(&["features", "--tracks", s(&gen.join("tracks.csv")), "--out", s(&feats)]);
    ok(&["select-k", "--features", s(&feats), "--out", s(&crit), "--k-min", "2", "--k-max", "8"]);
    let text = std::fs::read_to_string(&crit).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "K,AIC,BIC,silhouette");
    let ks: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ks, ["2", "3", "4", "5", "6", "7", "8"]);
}

#[test]
fn unknown_command_is_a_usage_error() {
    assert_eq!(pedrisk(&["bogus"]).status.code(), Some(2));
    assert_eq!(pedrisk(&["generate", "--out", "x", "--jobs", "0"]).status.code(), Some(2));
}

#[test]
fn malformed_csv_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "traj_id,frame,x_m,y_m\nA,0,1.0,2.0\nA,1,nope,2.0\n").unwrap();
    let out = pedrisk(&["features", "--tracks", s(&bad), "--out", s(&dir.path().join("f.csv"))]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(":3:"), "{err}");
}

#[test]
fn bad_override_is_rejected() {
    let out = pedrisk(&["generate", "--out", "unused", "--set", "no_such_key=1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn spectral_cluster_refuses_large_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let feats = dir.path().join("f.csv");
    let mut args = vec!["generate", "--out", s(&gen)];
    args.extend(SMALL);
    ok(&args);
    ok(&["features", "--tracks", s(&gen.join("tracks.csv")), "--out", s(&feats)]);
    let out = pedrisk(&[
        "cluster", "--features", s(&feats), "--out", s(&dir.path().join("c")), "--method", "spectral", "--set",
        "max_fit_rows=50",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn staged_commands_chain_into_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let small = |mut v: Vec<String>| {
        v.extend(SMALL.iter().map(|a| a.to_string()));
        let refs: Vec<&str> = v.iter().map(String::as_str).collect();
        ok(&refs);
    };
    let v = |a: &[&str]| a.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    small(v(&["generate", "--out", s(&p("train"))]));
    small(v(&["generate", "--out", s(&p("test")), "--split", "test"]));
    small(v(&["features", "--tracks", s(&p("train/tracks.csv")), "--out", s(&p("f.csv"))]));
    small(v(&["cluster", "--features", s(&p("f.csv")), "--out", s(&p("cl"))]));
    small(v(&["train-classifier", "--features", s(&p("cl/features_labeled.csv")), "--out", s(&p("svm.json"))]));
    small(v(&["train-predictor", "--tracks", s(&p("train/tracks.csv")), "--out", s(&p("lstm.json"))]));
    small(v(&[
        "predict", "--lstm", s(&p("lstm.json")), "--classifier", s(&p("svm.json")), "--tracks",
        s(&p("test/tracks.csv")), "--out", s(&p("pred.csv")), "--observe", "12",
    ]));
    small(v(&[
        "evaluate", "--lstm", s(&p("lstm.json")), "--classifier", s(&p("svm.json")), "--tracks",
        s(&p("test/tracks.csv")), "--out", s(&p("ev")),
    ]));

    let pred = std::fs::read_to_string(p("pred.csv")).unwrap();
    let rows: Vec<&str> = pred.lines().skip(1).collect();
    assert!(!rows.is_empty() && rows.len().is_multiple_of(5));
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("12")));
    let summary = std::fs::read_to_string(p("ev/summary.txt")).unwrap();
    assert!(summary.lines().any(|l| l.starts_with("overall_accuracy=")));
    for f in ["confusion.csv", "ade_sweep.csv", "risk_timeline.csv", "manifest.txt"] {
        assert!(p("ev").join(f).exists(), "{f}");
    }
}

#[test]
fn demo_config_reaches_target_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let conf = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/demo.conf");
    ok(&["evaluate", "--config", conf, "--out", s(dir.path())]);
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    let acc: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("overall_accuracy="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(acc >= 0.8, "accuracy {acc}");
}
