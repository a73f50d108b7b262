//! CSV and JSON formats for trajectories, feature states, tables and models.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! value reads back bit-for-bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterModel, CriterionRow, RiskLabel};
use crate::error::{Error, Result};
use crate::features::{EgoFramePoint, FeatureDataset, FeatureState, PedestrianTrack, TrackFeatures};
use crate::lstm::LstmModel;
use crate::svm::SvmModel;

pub const TRACK_HEADER: [&str; 4] = ["traj_id", "frame", "x_m", "y_m"];
pub const FEATURE_HEADER: [&str; 7] = ["traj_id", "frame", "px", "py", "vx", "vy", "ttc"];

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new().from_writer(create(path)?))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    let message = e.to_string();
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        _ => Error::Data {
            path: path.display().to_string(),
            line,
            message,
        },
    }
}

fn finish(path: &Path, mut w: csv::Writer<BufWriter<File>>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reader over data rows that reports the file line of every error.
struct Rows {
    path: String,
    reader: csv::Reader<BufReader<File>>,
    header: Vec<String>,
}

impl Rows {
    fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(BufReader::new(file));
        let header = reader
            .headers()
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        Ok(Self {
            path: path.display().to_string(),
            reader,
            header,
        })
    }

    fn err(&self, line: u64, message: impl Into<String>) -> Error {
        Error::Data {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn expect_header(&self, required: &[&str], optional: &[&str]) -> Result<()> {
        let n = required.len();
        let ok = self.header.len() >= n
            && self.header[..n].iter().zip(required).all(|(a, b)| a == b)
            && self.header[n..].iter().all(|h| optional.contains(&h.as_str()));
        if ok {
            Ok(())
        } else {
            let mut want = required.join(",");
            for o in optional {
                want.push_str(&format!("[,{o}]"));
            }
            Err(self.err(1, format!("unexpected header '{}', expected {want}", self.header.join(","))))
        }
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn next(&mut self) -> Result<Option<(u64, csv::StringRecord)>> {
        let mut rec = csv::StringRecord::new();
        let more = self
            .reader
            .read_record(&mut rec)
            .map_err(|e| csv_error(Path::new(&self.path), e))?;
        if !more {
            return Ok(None);
        }
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != self.header.len() {
            return Err(self.err(line, format!("expected {} fields, found {}", self.header.len(), rec.len())));
        }
        Ok(Some((line, rec)))
    }

    fn float(&self, line: u64, rec: &csv::StringRecord, col: usize) -> Result<f64> {
        let s = &rec[col];
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.err(line, format!("{}: '{s}' is not a finite number", self.header[col]))),
        }
    }

    fn uint(&self, line: u64, rec: &csv::StringRecord, col: usize) -> Result<usize> {
        let s = &rec[col];
        s.parse::<usize>()
            .map_err(|_| self.err(line, format!("{}: '{s}' is not a non-negative integer", self.header[col])))
    }
}

/// Groups consecutive rows by `traj_id`, checking frames run 0, 1, 2, ...
fn frame_check(rows: &Rows, line: u64, id: &str, frame: usize, expected: usize) -> Result<()> {
    if frame != expected {
        return Err(rows.err(
            line,
            format!("trajectory {id}: frame {frame} out of sequence, expected {expected}"),
        ));
    }
    Ok(())
}

pub fn read_tracks_csv(path: &Path, frame_rate: f64) -> Result<Vec<PedestrianTrack>> {
    let mut rows = Rows::open(path)?;
    rows.expect_header(&TRACK_HEADER, &[])?;
    let mut groups: Vec<(String, u64, Vec<EgoFramePoint>)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    while let Some((line, rec)) = rows.next()? {
        let id = rec[0].to_string();
        let frame = rows.uint(line, &rec, 1)?;
        let p = EgoFramePoint::new(rows.float(line, &rec, 2)?, rows.float(line, &rec, 3)?);
        match groups.last_mut() {
            Some((last, _, pts)) if *last == id => {
                frame_check(&rows, line, &id, frame, pts.len())?;
                pts.push(p);
            }
            _ => {
                if !seen.insert(id.clone()) {
                    return Err(rows.err(line, format!("rows of trajectory {id} are not contiguous")));
                }
                frame_check(&rows, line, &id, frame, 0)?;
                groups.push((id, line, vec![p]));
            }
        }
    }
    groups
        .into_iter()
        .map(|(id, line, pts)| {
            PedestrianTrack::new(id, frame_rate, pts).map_err(|e| rows.err(line, e.to_string()))
        })
        .collect()
}

pub fn write_tracks_csv(path: &Path, tracks: &[PedestrianTrack]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let e = |e| csv_error(path, e);
    w.write_record(TRACK_HEADER).map_err(e)?;
    for t in tracks {
        for (k, p) in t.points.iter().enumerate() {
            w.write_record([t.id.clone(), k.to_string(), p.x.to_string(), p.y.to_string()])
                .map_err(e)?;
        }
    }
    finish(path, w)
}

/// Feature rows with the optional cluster and risk columns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    pub dataset: FeatureDataset,
    pub clusters: Option<Vec<usize>>,
    pub risks: Option<Vec<RiskLabel>>,
}

impl FeatureTable {
    pub fn new(dataset: FeatureDataset) -> Self {
        Self {
            dataset,
            clusters: None,
            risks: None,
        }
    }
}

pub fn write_features_csv(path: &Path, table: &FeatureTable) -> Result<()> {
    let n = table.dataset.n_rows();
    for (name, len) in [
        ("cluster", table.clusters.as_ref().map(Vec::len)),
        ("risk", table.risks.as_ref().map(Vec::len)),
    ] {
        if let Some(len) = len.filter(|&l| l != n) {
            return Err(Error::invalid(format!("{len} {name} values for {n} feature rows")));
        }
    }
    let mut w = csv_writer(path)?;
    let e = |e| csv_error(path, e);
    let mut header: Vec<&str> = FEATURE_HEADER.to_vec();
    if table.clusters.is_some() {
        header.push("cluster");
    }
    if table.risks.is_some() {
        header.push("risk");
    }
    w.write_record(&header).map_err(e)?;
    for (row, (id, k, s)) in table.dataset.rows().enumerate() {
        let mut rec = vec![id.to_string(), k.to_string()];
        rec.extend(s.to_array().iter().map(f64::to_string));
        if let Some(c) = &table.clusters {
            rec.push(c[row].to_string());
        }
        if let Some(r) = &table.risks {
            rec.push(r[row].to_string());
        }
        w.write_record(&rec).map_err(e)?;
    }
    finish(path, w)
}

pub fn read_features_csv(path: &Path) -> Result<FeatureTable> {
    let mut rows = Rows::open(path)?;
    rows.expect_header(&FEATURE_HEADER, &["cluster", "risk"])?;
    let cluster_col = rows.column("cluster");
    let risk_col = rows.column("risk");
    let mut tracks: Vec<TrackFeatures> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut clusters = cluster_col.map(|_| Vec::new());
    let mut risks = risk_col.map(|_| Vec::new());
    while let Some((line, rec)) = rows.next()? {
        let id = rec[0].to_string();
        let frame = rows.uint(line, &rec, 1)?;
        let mut v = [0.0; 5];
        for (c, x) in v.iter_mut().enumerate() {
            *x = rows.float(line, &rec, c + 2)?;
        }
        let state = FeatureState::from_slice(&v)?;
        match tracks.last_mut() {
            Some(t) if t.id == id => {
                frame_check(&rows, line, &id, frame, t.states.len())?;
                t.states.push(state);
            }
            _ => {
                if !seen.insert(id.clone()) {
                    return Err(rows.err(line, format!("rows of trajectory {id} are not contiguous")));
                }
                frame_check(&rows, line, &id, frame, 0)?;
                tracks.push(TrackFeatures { id, states: vec![state] });
            }
        }
        if let (Some(col), Some(out)) = (cluster_col, clusters.as_mut()) {
            out.push(rows.uint(line, &rec, col)?);
        }
        if let (Some(col), Some(out)) = (risk_col, risks.as_mut()) {
            let label = rec[col].parse::<RiskLabel>().map_err(|e| rows.err(line, e.to_string()))?;
            out.push(label);
        }
    }
    Ok(FeatureTable {
        dataset: FeatureDataset { tracks },
        clusters,
        risks,
    })
}

/// `traj_id,frame,cluster,risk` for every row of a clustered dataset.
pub fn write_assignments_csv(
    path: &Path,
    dataset: &FeatureDataset,
    clusters: &[usize],
    risks: Option<&[RiskLabel]>,
) -> Result<()> {
    if clusters.len() != dataset.n_rows() || risks.is_some_and(|r| r.len() != clusters.len()) {
        return Err(Error::invalid("assignment count does not match the dataset"));
    }
    let mut w = csv_writer(path)?;
    let e = |e| csv_error(path, e);
    w.write_record(["traj_id", "frame", "cluster", "risk"]).map_err(e)?;
    for (row, (id, k, _)) in dataset.rows().enumerate() {
        let risk = risks.map_or(String::new(), |r| r[row].to_string());
        w.write_record([id.to_string(), k.to_string(), clusters[row].to_string(), risk])
            .map_err(e)?;
    }
    finish(path, w)
}

pub fn write_criteria_csv(path: &Path, table: &[CriterionRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let e = |e| csv_error(path, e);
    w.write_record(["K", "AIC", "BIC", "silhouette"]).map_err(e)?;
    for r in table {
        w.write_record([r.k.to_string(), r.aic.to_string(), r.bic.to_string(), r.silhouette.to_string()])
            .map_err(e)?;
    }
    finish(path, w)
}

/// Writes any header plus string rows.
pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let e = |e| csv_error(path, e);
    w.write_record(header).map_err(e)?;
    for r in rows {
        w.write_record(r).map_err(e)?;
    }
    finish(path, w)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub const MODEL_FORMAT: &str = "pedrisk-model";
pub const MODEL_VERSION: u32 = 1;

/// Models stored in the shared JSON envelope.
pub trait StoredModel: Serialize + DeserializeOwned {
    const KIND: &'static str;
}

impl StoredModel for LstmModel {
    const KIND: &'static str = "lstm";
}

impl StoredModel for ClusterModel {
    const KIND: &'static str = "cluster";
}

impl StoredModel for SvmModel {
    const KIND: &'static str = "svm";
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    kind: String,
    model: T,
}

#[derive(Deserialize)]
struct EnvelopeHead {
    format: String,
    version: u32,
    kind: String,
}

pub fn model_to_json<T: StoredModel>(model: &T) -> Result<String> {
    let env = Envelope {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        kind: T::KIND.to_string(),
        model,
    };
    let mut s = serde_json::to_string_pretty(&env).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn model_from_json<T: StoredModel>(json: &str) -> Result<T> {
    let head: EnvelopeHead = serde_json::from_str(json).map_err(|e| Error::Format(e.to_string()))?;
    if head.format != MODEL_FORMAT {
        return Err(Error::Format(format!("not a {MODEL_FORMAT} document (format '{}')", head.format)));
    }
    if head.version != MODEL_VERSION {
        return Err(Error::Format(format!(
            "unsupported model version {} (this build reads {MODEL_VERSION})",
            head.version
        )));
    }
    if head.kind != T::KIND {
        return Err(Error::Format(format!("expected a {} model, found '{}'", T::KIND, head.kind)));
    }
    let env: Envelope<T> = serde_json::from_str(json).map_err(|e| Error::Format(e.to_string()))?;
    Ok(env.model)
}

pub fn save_model<T: StoredModel>(path: &Path, model: &T) -> Result<()> {
    write_text(path, &model_to_json(model)?)
}

pub fn load_model<T: StoredModel>(path: &Path) -> Result<T> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&s).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}
