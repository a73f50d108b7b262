//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment. Every key has a default, so
//! an empty document is a valid configuration. Unknown keys and malformed
//! values are rejected with the offending line number.

use std::fmt::Display;
use std::str::FromStr;

use crate::cluster::{ClusterMethod, ClusterSettings, LaplacianKind, RetainedDims, RiskLabel};
use crate::error::{Error, Result};
use crate::features::{FeatureVariant, LowessParams};
use crate::kernel::KernelKind;
use crate::lstm::{Optimizer, OutputMode, TrainConfig};
use crate::sim::{default_scenario_set, Behavior, Scenario, ScenarioConfig};
use crate::svm::SvmSettings;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub frame_rate: f64,
    pub t_max: f64,
    pub t_pred: usize,
    pub lowess_span: f64,
    pub lowess_robust_iters: usize,

    /// Encounters simulated per scenario entry.
    pub train_encounters: usize,
    pub test_encounters: usize,
    pub noise_sigma: f64,
    pub scenarios: Vec<(Behavior, Scenario)>,

    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub output_mode: OutputMode,
    pub optimizer: Optimizer,
    pub sweep_t_min: usize,
    pub sweep_t_max: usize,
    pub cv_folds: usize,
    pub cv_repeats: usize,

    /// Feature variant for clustering and for the classifier trained on its labels.
    pub variant: FeatureVariant,
    pub cluster_method: ClusterMethod,
    pub k: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub standardize: bool,
    pub cluster_kernel: KernelKind,
    pub cluster_gamma: Option<f64>,
    pub cluster_coef0: f64,
    pub kpca_dims: RetainedDims,
    pub restarts: usize,
    pub max_fit_rows: usize,
    pub k_nn: usize,
    pub spectral_sigma: Option<f64>,
    pub laplacian: LaplacianKind,
    /// Risk label per cluster; `None` applies the semantic rule.
    pub label_map: Option<Vec<RiskLabel>>,

    pub svm_kernel: KernelKind,
    pub svm_gamma: Option<f64>,
    pub svm_coef0: f64,
    pub svm_c: f64,
    pub svm_tol: f64,
    pub svm_folds: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let cluster = ClusterSettings::default();
        let svm = SvmSettings::default();
        Self {
            seed: 1,
            frame_rate: 6.5,
            t_max: crate::features::DEFAULT_T_MAX,
            t_pred: train.t_pred,
            lowess_span: LowessParams::default().span,
            lowess_robust_iters: LowessParams::default().robust_iters,
            train_encounters: 30,
            test_encounters: 8,
            noise_sigma: 0.05,
            scenarios: default_scenario_set().iter().map(|c| (c.behavior, c.scenario)).collect(),
            hidden_dim: train.hidden_dim,
            learning_rate: train.learning_rate,
            momentum: train.momentum,
            epochs: train.epochs,
            batch_size: train.batch_size,
            clip_norm: train.clip_norm,
            output_mode: train.output_mode,
            optimizer: train.optimizer,
            sweep_t_min: 1,
            sweep_t_max: 8,
            cv_folds: 5,
            cv_repeats: 1,
            variant: cluster.variant,
            cluster_method: ClusterMethod::KpcaKmc,
            k: 4,
            k_min: 2,
            k_max: 8,
            standardize: cluster.standardize,
            cluster_kernel: cluster.kernel,
            cluster_gamma: cluster.gamma,
            cluster_coef0: cluster.coef0,
            kpca_dims: cluster.dims,
            restarts: cluster.restarts,
            max_fit_rows: cluster.max_fit_rows,
            k_nn: cluster.k_nn,
            spectral_sigma: cluster.sigma,
            laplacian: cluster.laplacian,
            label_map: None,
            svm_kernel: svm.kernel,
            svm_gamma: svm.gamma,
            svm_coef0: svm.coef0,
            svm_c: svm.c,
            svm_tol: svm.tol,
            svm_folds: 5,
        }
    }
}

fn value<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: Display,
{
    v.parse::<T>().map_err(|e| e.to_string())
}

fn auto_f64(v: &str) -> std::result::Result<Option<f64>, String> {
    if v == "auto" {
        Ok(None)
    } else {
        value::<f64>(v).map(Some)
    }
}

fn show_auto(v: Option<f64>) -> String {
    v.map_or("auto".to_string(), |x| x.to_string())
}

fn parse_dims(v: &str) -> std::result::Result<RetainedDims, String> {
    match v.strip_prefix("variance:") {
        Some(f) => Ok(RetainedDims::Variance(value(f)?)),
        None => Ok(RetainedDims::Fixed(value(v)?)),
    }
}

fn show_dims(d: RetainedDims) -> String {
    match d {
        RetainedDims::Variance(f) => format!("variance:{f}"),
        RetainedDims::Fixed(n) => n.to_string(),
    }
}

fn parse_scenarios(v: &str) -> std::result::Result<Vec<(Behavior, Scenario)>, String> {
    v.split(',')
        .map(|item| {
            let (b, s) = item
                .trim()
                .split_once(':')
                .ok_or_else(|| format!("scenario '{item}' is not behavior:scenario"))?;
            Ok((value(b)?, value(s)?))
        })
        .collect()
}

fn parse_labels(v: &str) -> std::result::Result<Option<Vec<RiskLabel>>, String> {
    if v == "auto" {
        return Ok(None);
    }
    v.split(',').map(|s| value(s.trim())).collect::<std::result::Result<_, _>>().map(Some)
}

fn join<T: Display>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Every key with its current value, in document order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("seed", self.seed.to_string()),
            ("frame_rate", self.frame_rate.to_string()),
            ("t_max", self.t_max.to_string()),
            ("t_pred", self.t_pred.to_string()),
            ("lowess_span", self.lowess_span.to_string()),
            ("lowess_robust_iters", self.lowess_robust_iters.to_string()),
            ("train_encounters", self.train_encounters.to_string()),
            ("test_encounters", self.test_encounters.to_string()),
            ("noise_sigma", self.noise_sigma.to_string()),
            ("scenarios", join(self.scenarios.iter().map(|(b, s)| format!("{b}:{s}")))),
            ("hidden_dim", self.hidden_dim.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("momentum", self.momentum.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("clip_norm", self.clip_norm.to_string()),
            ("output_mode", self.output_mode.to_string()),
            ("optimizer", self.optimizer.to_string()),
            ("sweep_t_min", self.sweep_t_min.to_string()),
            ("sweep_t_max", self.sweep_t_max.to_string()),
            ("cv_folds", self.cv_folds.to_string()),
            ("cv_repeats", self.cv_repeats.to_string()),
            ("variant", self.variant.to_string()),
            ("cluster_method", self.cluster_method.to_string()),
            ("k", self.k.to_string()),
            ("k_min", self.k_min.to_string()),
            ("k_max", self.k_max.to_string()),
            ("standardize", self.standardize.to_string()),
            ("cluster_kernel", self.cluster_kernel.to_string()),
            ("cluster_gamma", show_auto(self.cluster_gamma)),
            ("cluster_coef0", self.cluster_coef0.to_string()),
            ("kpca_dims", show_dims(self.kpca_dims)),
            ("restarts", self.restarts.to_string()),
            ("max_fit_rows", self.max_fit_rows.to_string()),
            ("k_nn", self.k_nn.to_string()),
            ("spectral_sigma", show_auto(self.spectral_sigma)),
            ("laplacian", self.laplacian.to_string()),
            ("label_map", self.label_map.as_ref().map_or("auto".to_string(), join)),
            ("svm_kernel", self.svm_kernel.to_string()),
            ("svm_gamma", show_auto(self.svm_gamma)),
            ("svm_coef0", self.svm_coef0.to_string()),
            ("svm_c", self.svm_c.to_string()),
            ("svm_tol", self.svm_tol.to_string()),
            ("svm_folds", self.svm_folds.to_string()),
        ]
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let r: std::result::Result<(), String> = (|| {
            match key {
                "seed" => self.seed = value(v)?,
                "frame_rate" => self.frame_rate = value(v)?,
                "t_max" => self.t_max = value(v)?,
                "t_pred" => self.t_pred = value(v)?,
                "lowess_span" => self.lowess_span = value(v)?,
                "lowess_robust_iters" => self.lowess_robust_iters = value(v)?,
                "train_encounters" => self.train_encounters = value(v)?,
                "test_encounters" => self.test_encounters = value(v)?,
                "noise_sigma" => self.noise_sigma = value(v)?,
                "scenarios" => self.scenarios = parse_scenarios(v)?,
                "hidden_dim" => self.hidden_dim = value(v)?,
                "learning_rate" => self.learning_rate = value(v)?,
                "momentum" => self.momentum = value(v)?,
                "epochs" => self.epochs = value(v)?,
                "batch_size" => self.batch_size = value(v)?,
                "clip_norm" => self.clip_norm = value(v)?,
                "output_mode" => self.output_mode = value(v)?,
                "optimizer" => self.optimizer = value(v)?,
                "sweep_t_min" => self.sweep_t_min = value(v)?,
                "sweep_t_max" => self.sweep_t_max = value(v)?,
                "cv_folds" => self.cv_folds = value(v)?,
                "cv_repeats" => self.cv_repeats = value(v)?,
                "variant" => self.variant = value(v)?,
                "cluster_method" => self.cluster_method = value(v)?,
                "k" => self.k = value(v)?,
                "k_min" => self.k_min = value(v)?,
                "k_max" => self.k_max = value(v)?,
                "standardize" => self.standardize = value(v)?,
                "cluster_kernel" => self.cluster_kernel = value(v)?,
                "cluster_gamma" => self.cluster_gamma = auto_f64(v)?,
                "cluster_coef0" => self.cluster_coef0 = value(v)?,
                "kpca_dims" => self.kpca_dims = parse_dims(v)?,
                "restarts" => self.restarts = value(v)?,
                "max_fit_rows" => self.max_fit_rows = value(v)?,
                "k_nn" => self.k_nn = value(v)?,
                "spectral_sigma" => self.spectral_sigma = auto_f64(v)?,
                "laplacian" => self.laplacian = value(v)?,
                "label_map" => self.label_map = parse_labels(v)?,
                "svm_kernel" => self.svm_kernel = value(v)?,
                "svm_gamma" => self.svm_gamma = auto_f64(v)?,
                "svm_coef0" => self.svm_coef0 = value(v)?,
                "svm_c" => self.svm_c = value(v)?,
                "svm_tol" => self.svm_tol = value(v)?,
                "svm_folds" => self.svm_folds = value(v)?,
                _ => return Err(format!("unknown key '{key}'")),
            }
            Ok(())
        })();
        r.map_err(|m| {
            if m.starts_with("unknown key") {
                Error::invalid(m)
            } else {
                Error::invalid(format!("{key} = {v}: {m}"))
            }
        })
    }

    /// Parses a document on top of the defaults. `origin` names the source in
    /// diagnostics.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Data {
                path: origin.to_string(),
                line: i as u64 + 1,
                message,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', found '{line}'")))?;
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_string()) {
                return Err(err(format!("key '{k}' set twice")));
            }
            cfg.set(k, v).map_err(|e| match e {
                Error::InvalidInput(m) => err(m),
                other => other,
            })?;
        }
        cfg.validate().map_err(|e| match e {
            Error::InvalidInput(m) => Error::Data {
                path: origin.to_string(),
                line: 0,
                message: m,
            },
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// The full effective configuration as a document `parse` accepts.
    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("frame_rate", self.frame_rate),
            ("t_max", self.t_max),
            ("lowess_span", self.lowess_span),
            ("svm_c", self.svm_c),
            ("svm_tol", self.svm_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.noise_sigma < 0.0 || !self.noise_sigma.is_finite() {
            return Err(Error::invalid("noise_sigma must be non-negative"));
        }
        if self.scenarios.is_empty() {
            return Err(Error::invalid("at least one scenario is required"));
        }
        if self.k < 2 || self.k_min < 2 || self.k_min > self.k_max {
            return Err(Error::invalid(format!(
                "need k >= 2 and 2 <= k_min <= k_max (k = {}, k_min = {}, k_max = {})",
                self.k, self.k_min, self.k_max
            )));
        }
        if self.sweep_t_min == 0 || self.sweep_t_min > self.sweep_t_max {
            return Err(Error::invalid("need 1 <= sweep_t_min <= sweep_t_max"));
        }
        if self.cv_folds < 2 || self.svm_folds < 2 || self.cv_repeats == 0 {
            return Err(Error::invalid("cross-validation needs at least 2 folds and 1 repeat"));
        }
        if let Some(map) = &self.label_map {
            if map.len() != self.k {
                return Err(Error::invalid(format!("label_map has {} entries but k = {}", map.len(), self.k)));
            }
        }
        self.train_config().validate()?;
        self.cluster_settings().validate()?;
        Ok(())
    }

    pub fn lowess(&self) -> LowessParams {
        LowessParams {
            span: self.lowess_span,
            robust_iters: self.lowess_robust_iters,
        }
    }

    pub fn scenario_configs(&self) -> Vec<ScenarioConfig> {
        self.scenarios
            .iter()
            .map(|&(b, s)| {
                let mut c = ScenarioConfig::preset(b, s);
                c.noise_sigma = self.noise_sigma;
                c.frame_rate = self.frame_rate;
                c
            })
            .collect()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            hidden_dim: self.hidden_dim,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            epochs: self.epochs,
            batch_size: self.batch_size,
            clip_norm: self.clip_norm,
            seed: crate::rng::derive_seed(self.seed, "lstm", 0),
            t_pred: self.t_pred,
            output_mode: self.output_mode,
            optimizer: self.optimizer,
        }
    }

    pub fn cluster_settings(&self) -> ClusterSettings {
        ClusterSettings {
            variant: self.variant,
            standardize: self.standardize,
            kernel: self.cluster_kernel,
            gamma: self.cluster_gamma,
            coef0: self.cluster_coef0,
            dims: self.kpca_dims,
            restarts: self.restarts,
            max_fit_rows: self.max_fit_rows,
            k_nn: self.k_nn,
            sigma: self.spectral_sigma,
            laplacian: self.laplacian,
        }
    }

    pub fn svm_settings(&self) -> SvmSettings {
        SvmSettings {
            kernel: self.svm_kernel,
            gamma: self.svm_gamma,
            coef0: self.svm_coef0,
            c: self.svm_c,
            tol: self.svm_tol,
            variant: self.variant,
        }
    }
}
