//! LSTM cell, output layer and autoregressive rollout.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::EgoFramePoint;
use crate::rng;

/// Per-axis affine map of ego-frame coordinates to zero mean, unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: [f64; 2],
    pub scale: [f64; 2],
}

impl Normalizer {
    pub fn identity() -> Self {
        Self {
            mean: [0.0; 2],
            scale: [1.0; 2],
        }
    }

    pub fn fit<'a>(points: impl IntoIterator<Item = &'a EgoFramePoint>) -> Result<Self> {
        let pts: Vec<[f64; 2]> = points.into_iter().map(|p| [p.x, p.y]).collect();
        if pts.is_empty() {
            return Err(Error::invalid("cannot fit coordinate normalization on no points"));
        }
        let n = pts.len() as f64;
        let mut mean = [0.0; 2];
        let mut scale = [0.0; 2];
        for a in 0..2 {
            mean[a] = pts.iter().map(|p| p[a]).sum::<f64>() / n;
            let var = pts.iter().map(|p| (p[a] - mean[a]).powi(2)).sum::<f64>() / n;
            scale[a] = if var.sqrt() > 1e-9 { var.sqrt() } else { 1.0 };
        }
        Ok(Self { mean, scale })
    }

    pub fn forward(&self, p: EgoFramePoint) -> [f64; 2] {
        [(p.x - self.mean[0]) / self.scale[0], (p.y - self.mean[1]) / self.scale[1]]
    }

    pub fn inverse(&self, z: [f64; 2]) -> EgoFramePoint {
        EgoFramePoint::new(z[0] * self.scale[0] + self.mean[0], z[1] * self.scale[1] + self.mean[1])
    }
}

/// Hidden output and cell state.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Gate order inside the stacked weight block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Forget = 0,
    Input = 1,
    Output = 2,
    Candidate = 3,
}

/// LSTM with a two-dimensional input and a linear two-dimensional output.
///
/// All parameters live in one flat vector laid out as the stacked gate
/// weights `[W_f; W_i; W_o; W_c]` (each `H x (H+2)`, columns `[h, p]`), the
/// stacked gate biases, `W_fc` (`2 x H`) and `b_fc`.
/// How the output layer turns `W_fc h + b_fc` into a position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    /// The linear output is the position itself.
    #[default]
    Absolute,
    /// The linear output is a displacement added to the previous position
    /// (the last observed point, then the previous prediction).
    Residual,
}

impl fmt::Display for OutputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputMode::Absolute => "absolute",
            OutputMode::Residual => "residual",
        })
    }
}

impl FromStr for OutputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(OutputMode::Absolute),
            "residual" => Ok(OutputMode::Residual),
            other => Err(Error::invalid(format!(
                "unknown output mode '{other}' (expected absolute or residual)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    hidden: usize,
    pub(crate) params: Vec<f64>,
    pub norm: Normalizer,
    pub output_mode: OutputMode,
    /// Per-axis multiplier on the linear output in residual mode.
    pub step_scale: [f64; 2],
}

pub(crate) struct Layout {
    pub gate_w: usize,
    pub gate_b: usize,
    pub fc_w: usize,
    pub fc_b: usize,
    pub len: usize,
}

impl Layout {
    pub fn new(h: usize) -> Self {
        let gate_w = 0;
        let gate_b = gate_w + 4 * h * (h + 2);
        let fc_w = gate_b + 4 * h;
        let fc_b = fc_w + 2 * h;
        Self {
            gate_w,
            gate_b,
            fc_w,
            fc_b,
            len: fc_b + 2,
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Everything a backward pass needs from one cell step.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub x: [f64; 2],
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated gates, stacked f, i, o, g.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmModel {
    pub fn zeros(hidden: usize) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::invalid("hidden dimension must be at least 1"));
        }
        Ok(Self {
            hidden,
            params: vec![0.0; Layout::new(hidden).len],
            norm: Normalizer::identity(),
            output_mode: OutputMode::Absolute,
            step_scale: [1.0, 1.0],
        })
    }

    /// Uniform weights in `±1/sqrt(H+2)`, zero biases except the forget gate at +1.
    pub fn init(hidden: usize, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(hidden)?;
        let l = Layout::new(hidden);
        let bound = 1.0 / ((hidden + 2) as f64).sqrt();
        let mut r = rng::stream(seed, "lstm-init", 0);
        for i in l.gate_w..l.gate_b {
            m.params[i] = r.random_range(-bound..bound);
        }
        for i in l.fc_w..l.fc_b {
            m.params[i] = r.random_range(-bound..bound);
        }
        for j in 0..hidden {
            m.params[l.gate_b + Gate::Forget as usize * hidden + j] = 1.0;
        }
        Ok(m)
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub(crate) fn layout(&self) -> Layout {
        Layout::new(self.hidden)
    }

    /// `H x (H+2)` weights of one gate, row-major.
    pub fn gate_weights(&self, g: Gate) -> &[f64] {
        let h = self.hidden;
        let block = h * (h + 2);
        &self.params[g as usize * block..(g as usize + 1) * block]
    }

    pub fn gate_bias(&self, g: Gate) -> &[f64] {
        let l = self.layout();
        &self.params[l.gate_b + g as usize * self.hidden..l.gate_b + (g as usize + 1) * self.hidden]
    }

    pub fn fc_weights(&self) -> &[f64] {
        let l = self.layout();
        &self.params[l.fc_w..l.fc_b]
    }

    pub fn fc_bias(&self) -> [f64; 2] {
        let l = self.layout();
        [self.params[l.fc_b], self.params[l.fc_b + 1]]
    }

    pub(crate) fn step(&self, h_prev: &[f64], c_prev: &[f64], x: [f64; 2]) -> StepCache {
        let h = self.hidden;
        let l = self.layout();
        let w = &self.params[l.gate_w..l.gate_b];
        let b = &self.params[l.gate_b..l.fc_w];
        let mut gates = vec![0.0; 4 * h];
        for (r, z) in gates.iter_mut().enumerate() {
            let row = &w[r * (h + 2)..(r + 1) * (h + 2)];
            let mut acc = b[r];
            for (wk, hk) in row[..h].iter().zip(h_prev) {
                acc += wk * hk;
            }
            acc += row[h] * x[0] + row[h + 1] * x[1];
            *z = if r < 3 * h { sigmoid(acc) } else { acc.tanh() };
        }
        let mut c = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        let mut hn = vec![0.0; h];
        for j in 0..h {
            let (f, i, o, g) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            c[j] = f * c_prev[j] + i * g;
            tanh_c[j] = c[j].tanh();
            hn[j] = o * tanh_c[j];
        }
        StepCache {
            x,
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates,
            c,
            tanh_c,
            h: hn,
        }
    }

    pub(crate) fn output(&self, h: &[f64]) -> [f64; 2] {
        let l = self.layout();
        let w = &self.params[l.fc_w..l.fc_b];
        let mut y = [self.params[l.fc_b], self.params[l.fc_b + 1]];
        for (a, ya) in y.iter_mut().enumerate() {
            for (wk, hk) in w[a * self.hidden..(a + 1) * self.hidden].iter().zip(h) {
                *ya += wk * hk;
            }
        }
        y
    }

    /// Model-space rollout: consume `inputs`, then emit `t_pred` outputs, each
    /// fed back as the next input.
    pub(crate) fn rollout(&self, inputs: &[[f64; 2]], t_pred: usize) -> Vec<[f64; 2]> {
        let mut h = vec![0.0; self.hidden];
        let mut c = vec![0.0; self.hidden];
        for &x in inputs {
            let s = self.step(&h, &c, x);
            h = s.h;
            c = s.c;
        }
        let mut out = Vec::with_capacity(t_pred);
        let mut prev = inputs.last().copied().unwrap_or([0.0; 2]);
        for k in 0..t_pred {
            let mut y = self.output(&h);
            if self.output_mode == OutputMode::Residual {
                y = [prev[0] + self.step_scale[0] * y[0], prev[1] + self.step_scale[1] * y[1]];
            }
            prev = y;
            out.push(y);
            if k + 1 < t_pred {
                let s = self.step(&h, &c, y);
                h = s.h;
                c = s.c;
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.len() != Layout::new(self.hidden).len {
            return Err(Error::invalid("parameter vector does not match the hidden dimension"));
        }
        if self.params.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("LSTM parameters contain a non-finite value"));
        }
        if self.step_scale.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("step scale must be positive and finite"));
        }
        Ok(())
    }
}

/// One LSTM step on a model-space input.
pub fn cell_forward(model: &LstmModel, state: &LstmState, input: [f64; 2]) -> Result<LstmState> {
    let h = model.hidden();
    if state.h.len() != h || state.c.len() != h {
        return Err(Error::invalid(format!(
            "state has dims ({}, {}), model hidden dimension is {h}",
            state.h.len(),
            state.c.len()
        )));
    }
    let s = model.step(&state.h, &state.c, input);
    Ok(LstmState { h: s.h, c: s.c })
}

/// Model-space forward pass over an observed prefix followed by `t_pred`
/// autoregressive outputs `W_fc h + b_fc` (plus the previous position in
/// residual mode).
pub fn sequence_forward(model: &LstmModel, inputs: &[[f64; 2]], t_pred: usize) -> Result<Vec<[f64; 2]>> {
    if inputs.is_empty() {
        return Err(Error::invalid("sequence_forward needs at least one input"));
    }
    if t_pred == 0 {
        return Err(Error::invalid("prediction horizon must be at least 1"));
    }
    Ok(model.rollout(inputs, t_pred))
}

/// Predicts the next `t_pred` ego-frame positions after an observed prefix,
/// applying the model's coordinate normalization on the way in and out.
pub fn predict_window(model: &LstmModel, observed: &[EgoFramePoint], t_pred: usize) -> Result<Vec<EgoFramePoint>> {
    let inputs: Vec<[f64; 2]> = observed.iter().map(|p| model.norm.forward(*p)).collect();
    Ok(sequence_forward(model, &inputs, t_pred)?
        .into_iter()
        .map(|z| model.norm.inverse(z))
        .collect())
}

/// Serialized form with named, row-major weight arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmDoc {
    pub hidden_dim: usize,
    pub input_dim: usize,
    pub output_mode: OutputMode,
    pub step_scale: [f64; 2],
    pub norm_mean: [f64; 2],
    pub norm_scale: [f64; 2],
    pub w_f: Vec<f64>,
    pub w_i: Vec<f64>,
    pub w_o: Vec<f64>,
    pub w_c: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_o: Vec<f64>,
    pub b_c: Vec<f64>,
    pub w_fc: Vec<f64>,
    pub b_fc: Vec<f64>,
}

impl From<&LstmModel> for LstmDoc {
    fn from(m: &LstmModel) -> Self {
        LstmDoc {
            hidden_dim: m.hidden,
            input_dim: 2,
            output_mode: m.output_mode,
            step_scale: m.step_scale,
            norm_mean: m.norm.mean,
            norm_scale: m.norm.scale,
            w_f: m.gate_weights(Gate::Forget).to_vec(),
            w_i: m.gate_weights(Gate::Input).to_vec(),
            w_o: m.gate_weights(Gate::Output).to_vec(),
            w_c: m.gate_weights(Gate::Candidate).to_vec(),
            b_f: m.gate_bias(Gate::Forget).to_vec(),
            b_i: m.gate_bias(Gate::Input).to_vec(),
            b_o: m.gate_bias(Gate::Output).to_vec(),
            b_c: m.gate_bias(Gate::Candidate).to_vec(),
            w_fc: m.fc_weights().to_vec(),
            b_fc: m.fc_bias().to_vec(),
        }
    }
}

impl TryFrom<LstmDoc> for LstmModel {
    type Error = Error;

    fn try_from(d: LstmDoc) -> Result<Self> {
        let h = d.hidden_dim;
        if h == 0 || d.input_dim != 2 {
            return Err(Error::Format(format!(
                "unsupported LSTM dimensions (hidden {h}, input {})",
                d.input_dim
            )));
        }
        let check = |name: &str, v: &Vec<f64>, len: usize| {
            if v.len() == len {
                Ok(())
            } else {
                Err(Error::Format(format!("{name} has {} entries, expected {len}", v.len())))
            }
        };
        for (name, v) in [("w_f", &d.w_f), ("w_i", &d.w_i), ("w_o", &d.w_o), ("w_c", &d.w_c)] {
            check(name, v, h * (h + 2))?;
        }
        for (name, v) in [("b_f", &d.b_f), ("b_i", &d.b_i), ("b_o", &d.b_o), ("b_c", &d.b_c)] {
            check(name, v, h)?;
        }
        check("w_fc", &d.w_fc, 2 * h)?;
        check("b_fc", &d.b_fc, 2)?;
        let params: Vec<f64> = [&d.w_f, &d.w_i, &d.w_o, &d.w_c, &d.b_f, &d.b_i, &d.b_o, &d.b_c, &d.w_fc, &d.b_fc]
            .into_iter()
            .flatten()
            .copied()
            .collect();
        let m = LstmModel {
            hidden: h,
            params,
            norm: Normalizer {
                mean: d.norm_mean,
                scale: d.norm_scale,
            },
            output_mode: d.output_mode,
            step_scale: d.step_scale,
        };
        m.validate()?;
        Ok(m)
    }
}

impl Serialize for LstmModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LstmDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for LstmModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = LstmDoc::deserialize(d)?;
        LstmModel::try_from(doc).map_err(serde::de::Error::custom)
    }
}
