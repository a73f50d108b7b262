use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::confusion::{confusion, ConfusionMatrix};
use super::sequence::{evaluate_windows_end_to_end, RiskSequence, WindowOutcome};
use crate::cluster::RiskLabel;
use crate::error::{Error, Result};
use crate::features::PedestrianTrack;
use crate::io::{write_table_csv, write_text};
use crate::lstm::{LstmModel, SweepRow};
use crate::svm::SvmModel;

/// Result of running the whole chain over held-out trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub t_pred: usize,
    pub windows: Vec<WindowOutcome>,
    pub confusion: ConfusionMatrix,
    /// ADE by horizon over the evaluated windows.
    pub ade: Vec<SweepRow>,
}

impl EvaluationReport {
    pub fn accuracy(&self) -> f64 {
        self.confusion.accuracy()
    }
}

/// ADE over the first `h` predicted frames of every window, for `h` in
/// `1..=t_pred`.
pub fn ade_by_horizon(windows: &[WindowOutcome], t_pred: usize) -> Vec<SweepRow> {
    (1..=t_pred)
        .map(|h| {
            let n = windows.len().max(1) as f64;
            let avg = |e: &[f64]| e[..h].iter().sum::<f64>() / h as f64;
            SweepRow {
                t_pred: h,
                ade: windows.iter().map(|w| avg(&w.step_errors)).sum::<f64>() / n,
                baseline_ade: windows.iter().map(|w| avg(&w.baseline_step_errors)).sum::<f64>() / n,
                windows: windows.len(),
            }
        })
        .collect()
}

/// Predicts and scores every valid (trajectory, t) window of `tracks`.
pub fn end_to_end_evaluate(
    lstm: &LstmModel,
    clf: &SvmModel,
    tracks: &[PedestrianTrack],
    t_pred: usize,
    t_max: f64,
) -> Result<EvaluationReport> {
    let windows = evaluate_windows_end_to_end(lstm, clf, tracks, t_pred, t_max)?;
    if windows.is_empty() {
        return Err(Error::invalid(format!(
            "no trajectory is long enough for a {t_pred}-frame prediction window"
        )));
    }
    let (pred, actual): (Vec<RiskSequence>, Vec<RiskSequence>) =
        windows.iter().map(|w| (w.predicted.clone(), w.actual.clone())).unzip();
    let confusion = confusion(&pred, &actual)?;
    let ade = ade_by_horizon(&windows, t_pred);
    Ok(EvaluationReport {
        t_pred,
        windows,
        confusion,
        ade,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or("na".to_string(), |x| x.to_string())
}

pub fn confusion_rows(m: &ConfusionMatrix) -> Vec<Vec<String>> {
    RiskLabel::ALL
        .iter()
        .map(|p| {
            let mut row = vec![p.to_string()];
            row.extend(m.counts[p.index()].iter().map(u64::to_string));
            row
        })
        .collect()
}

pub fn sweep_rows(rows: &[SweepRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| vec![r.t_pred.to_string(), r.ade.to_string(), r.baseline_ade.to_string(), r.windows.to_string()])
        .collect()
}

pub const SWEEP_HEADER: [&str; 4] = ["t_pred", "ade", "baseline_ade", "windows"];

/// key=value metrics; `extra` pairs are appended after the built-in ones.
pub fn summary_text(report: &EvaluationReport, extra: &[(String, String)]) -> String {
    let m = &report.confusion;
    let at_t = report.ade.last();
    let mut kv: Vec<(String, String)> = vec![
        ("windows".into(), report.windows.len().to_string()),
        ("states".into(), m.total().to_string()),
        ("t_pred".into(), report.t_pred.to_string()),
        ("overall_accuracy".into(), m.accuracy().to_string()),
        ("ade".into(), opt(at_t.map(|r| r.ade))),
        ("baseline_ade".into(), opt(at_t.map(|r| r.baseline_ade))),
    ];
    for l in RiskLabel::ALL {
        let name = l.name();
        kv.push((format!("actual_{name}"), m.col_sums()[l.index()].to_string()));
        kv.push((format!("predicted_{name}"), m.row_sums()[l.index()].to_string()));
        kv.push((format!("precision_{name}"), opt(m.precision(l))));
        kv.push((format!("recall_{name}"), opt(m.recall(l))));
        kv.push((format!("miss_rate_{name}"), opt(m.miss_rate(l))));
    }
    let mut s = String::from("# every valid window is evaluated (overlapping windows); accuracy is per predicted state\n");
    for (k, v) in kv.iter().chain(extra) {
        let _ = writeln!(s, "{k}={v}");
    }
    s
}

/// Writes `confusion.csv`, `ade_sweep.csv`, `risk_timeline.csv` and
/// `summary.txt` into `dir`. `sweep` replaces the by-horizon ADE table when
/// given.
pub fn write_report(
    dir: &Path,
    report: &EvaluationReport,
    sweep: Option<&[SweepRow]>,
    extra: &[(String, String)],
) -> Result<()> {
    let mut header = vec!["predicted"];
    header.extend(RiskLabel::ALL.iter().map(|l| l.name()));
    write_table_csv(&dir.join("confusion.csv"), &header, &confusion_rows(&report.confusion))?;
    write_table_csv(
        &dir.join("ade_sweep.csv"),
        &SWEEP_HEADER,
        &sweep_rows(sweep.unwrap_or(&report.ade)),
    )?;
    let timeline: Vec<Vec<String>> = report
        .windows
        .iter()
        .flat_map(|w| {
            w.predicted
                .labels
                .iter()
                .zip(&w.actual.labels)
                .enumerate()
                .map(|(k, (p, a))| {
                    vec![
                        w.predicted.id.clone(),
                        w.predicted.t.to_string(),
                        (k + 1).to_string(),
                        p.to_string(),
                        a.to_string(),
                    ]
                })
        })
        .collect();
    write_table_csv(
        &dir.join("risk_timeline.csv"),
        &["traj_id", "t", "step", "predicted_risk", "actual_risk"],
        &timeline,
    )?;
    write_text(&dir.join("summary.txt"), &summary_text(report, extra))
}
