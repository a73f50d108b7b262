//! One-vs-one multiclass SVM over risk labels.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{variant_matrix, RiskLabel};
use crate::error::{Error, Result};
use crate::features::{select_features, FeatureState, FeatureVariant};
use crate::kernel::KernelKind;
use crate::linalg::RowMatrix;
use crate::rng;
use crate::standardize::Standardizer;

use super::binary::{svm_train_binary, BinarySvm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmSettings {
    pub kernel: KernelKind,
    pub gamma: Option<f64>,
    pub coef0: f64,
    pub c: f64,
    pub tol: f64,
    pub variant: FeatureVariant,
}

impl Default for SvmSettings {
    fn default() -> Self {
        Self {
            kernel: KernelKind::Gaussian,
            gamma: None,
            coef0: 1.0,
            c: 10.0,
            tol: 1e-3,
            variant: FeatureVariant::All,
        }
    }
}

/// Machine for the class pair `(pos, neg)`; positive decisions vote for `pos`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMachine {
    pub pos: RiskLabel,
    pub neg: RiskLabel,
    pub svm: BinarySvm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub variant: FeatureVariant,
    pub standardizer: Standardizer,
    /// Classes present in training, in ascending label order.
    pub classes: Vec<RiskLabel>,
    pub machines: Vec<PairMachine>,
}

pub fn svm_train_multiclass(states: &[FeatureState], labels: &[RiskLabel], settings: &SvmSettings) -> Result<SvmModel> {
    if states.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} labels for {} states",
            labels.len(),
            states.len()
        )));
    }
    let mut classes = labels.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::invalid("classifier needs at least two classes"));
    }
    let raw = variant_matrix(states, settings.variant);
    let standardizer = Standardizer::fit(&raw)?;
    let x = standardizer.apply(&raw);
    let kernel = settings.kernel.resolve(&x, settings.gamma, settings.coef0);

    let pairs: Vec<(RiskLabel, RiskLabel)> = classes
        .iter()
        .enumerate()
        .flat_map(|(a, &p)| classes[a + 1..].iter().map(move |&q| (p, q)))
        .collect();
    let machines = pairs
        .into_par_iter()
        .map(|(pos, neg)| {
            let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == pos || labels[i] == neg).collect();
            // orient the binary problem by its first row so that renaming
            // classes yields the very same optimization problem
            let first = labels[idx[0]];
            let y: Vec<i8> = idx.iter().map(|&i| if labels[i] == first { 1 } else { -1 }).collect();
            let mut svm = svm_train_binary(&x.select_rows(&idx), &y, kernel, settings.c, settings.tol)?.svm;
            if first != pos {
                svm.coef.iter_mut().for_each(|c| *c = -*c);
                svm.bias = -svm.bias;
            }
            Ok(PairMachine { pos, neg, svm })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SvmModel {
        variant: settings.variant,
        standardizer,
        classes,
        machines,
    })
}

impl SvmModel {
    /// Majority vote over pairwise machines; ties go to the class with the
    /// largest summed margin in its favor, then to the lower label.
    pub fn predict(&self, state: &FeatureState) -> RiskLabel {
        let x = self.standardizer.apply_row(&select_features(state, self.variant));
        self.predict_standardized(&x)
    }

    fn predict_standardized(&self, x: &[f64]) -> RiskLabel {
        let mut votes = [0usize; 4];
        let mut margin = [0.0f64; 4];
        for m in &self.machines {
            let f = m.svm.decision(x);
            let (winner, loser) = if f >= 0.0 { (m.pos, m.neg) } else { (m.neg, m.pos) };
            votes[winner.index()] += 1;
            margin[winner.index()] += f.abs();
            margin[loser.index()] -= f.abs();
        }
        *self
            .classes
            .iter()
            .max_by(|a, b| {
                votes[a.index()]
                    .cmp(&votes[b.index()])
                    .then(margin[a.index()].total_cmp(&margin[b.index()]))
                    .then(b.cmp(a))
            })
            .expect("at least two classes")
    }

    pub fn predict_all(&self, states: &[FeatureState]) -> Vec<RiskLabel> {
        states.par_iter().map(|s| self.predict(s)).collect()
    }

    pub fn n_support_vectors(&self) -> usize {
        self.machines.iter().map(|m| m.svm.coef.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Single-threaded predictions per second.
    pub preds_per_sec: f64,
}

pub const MIN_TIMED_PREDICTIONS: usize = 10_000;

/// Accuracy on `states`, plus throughput timed over at least ten thousand
/// single-threaded predictions (the set is cycled when smaller).
pub fn evaluate_classifier(model: &SvmModel, states: &[FeatureState], labels: &[RiskLabel]) -> Result<Evaluation> {
    if states.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty set"));
    }
    if states.len() != labels.len() {
        return Err(Error::invalid("state and label counts differ"));
    }
    let predicted = model.predict_all(states);
    let correct = predicted.iter().zip(labels).filter(|(a, b)| a == b).count();
    let total = states.len().max(MIN_TIMED_PREDICTIONS);
    let start = Instant::now();
    let mut sink = 0usize;
    for i in 0..total {
        sink += model.predict(&states[i % states.len()]).index();
    }
    let secs = start.elapsed().as_secs_f64().max(1e-9);
    std::hint::black_box(sink);
    Ok(Evaluation {
        accuracy: correct as f64 / states.len() as f64,
        preds_per_sec: total as f64 / secs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub accuracy: f64,
    pub preds_per_sec: f64,
}

/// Shuffled k-fold split of `0..n`: fold `f` holds every index whose shuffled
/// position is congruent to `f` mod `folds`.
pub fn kfold_indices(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || folds > n {
        return Err(Error::invalid(format!("cannot split {n} items into {folds} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "svm-folds", 0));
    let mut out = vec![Vec::new(); folds];
    for (pos, i) in order.into_iter().enumerate() {
        out[pos % folds].push(i);
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

/// K-fold cross-validation of the classifier over feature states.
///
/// Folds are evaluated one after another so the throughput numbers are not
/// skewed by concurrent training.
pub fn cross_validate(
    states: &[FeatureState],
    labels: &[RiskLabel],
    settings: &SvmSettings,
    folds: usize,
    seed: u64,
) -> Result<Vec<FoldResult>> {
    let split = kfold_indices(states.len(), folds, seed)?;
    let mut out = Vec::with_capacity(folds);
    for (f, test) in split.iter().enumerate() {
        let mut is_test = vec![false; states.len()];
        test.iter().for_each(|&i| is_test[i] = true);
        let (mut tr_s, mut tr_l, mut te_s, mut te_l) = (vec![], vec![], vec![], vec![]);
        for i in 0..states.len() {
            if is_test[i] {
                te_s.push(states[i]);
                te_l.push(labels[i]);
            } else {
                tr_s.push(states[i]);
                tr_l.push(labels[i]);
            }
        }
        let model = svm_train_multiclass(&tr_s, &tr_l, settings)?;
        let e = evaluate_classifier(&model, &te_s, &te_l)?;
        out.push(FoldResult {
            fold: f,
            accuracy: e.accuracy,
            preds_per_sec: e.preds_per_sec,
        });
    }
    Ok(out)
}

/// Standardized training matrix of a model's variant, for diagnostics.
pub fn standardized_matrix(model: &SvmModel, states: &[FeatureState]) -> RowMatrix {
    model.standardizer.apply(&variant_matrix(states, model.variant))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(per: usize, sd: f64, seed: u64) -> (Vec<FeatureState>, Vec<RiskLabel>) {
        let centers = [
            (RiskLabel::Dangerous, [5.0, 1.0, -3.0, -1.0, 1.5]),
            (RiskLabel::Alert, [30.0, -4.0, -5.5, 1.5, 5.0]),
            (RiskLabel::JointlySafe, [7.0, 4.0, -1.0, 0.0, 8.0]),
            (RiskLabel::IndependentlySafe, [25.0, 6.0, 0.6, 1.0, 10.0]),
        ];
        let mut r = rng::stream(seed, "blobs", 0);
        let noise = Normal::new(0.0, sd).unwrap();
        let mut s = vec![];
        let mut l = vec![];
        for _ in 0..per {
            for (label, c) in &centers {
                let v: Vec<f64> = c.iter().map(|m| m + noise.sample(&mut r)).collect();
                s.push(FeatureState::from_slice(&v).unwrap());
                l.push(*label);
            }
        }
        (s, l)
    }

    #[test]
    fn separable_blobs_held_out() {
        let (s, l) = blobs(40, 0.5, 1);
        let model = svm_train_multiclass(&s, &l, &SvmSettings::default()).unwrap();
        assert_eq!(model.machines.len(), 6);
        let (ts, tl) = blobs(50, 0.5, 2);
        let e = evaluate_classifier(&model, &ts, &tl).unwrap();
        assert!(e.accuracy >= 0.99, "{e:?}");
        assert!(e.preds_per_sec > 0.0);
    }

    #[test]
    fn memorizes_one_point_per_class() {
        let (s, l) = blobs(1, 0.1, 3);
        let s2: Vec<FeatureState> = s.iter().chain(s.iter()).copied().collect();
        let l2: Vec<RiskLabel> = l.iter().chain(l.iter()).copied().collect();
        let model = svm_train_multiclass(&s2, &l2, &SvmSettings::default()).unwrap();
        for (x, y) in s.iter().zip(&l) {
            assert_eq!(model.predict(x), *y);
        }
    }

    #[test]
    fn machine_order_does_not_matter() {
        let (s, l) = blobs(20, 2.0, 4);
        let model = svm_train_multiclass(&s, &l, &SvmSettings::default()).unwrap();
        let mut rev = model.clone();
        rev.machines.reverse();
        let (ts, _) = blobs(30, 3.0, 5);
        assert_eq!(model.predict_all(&ts), rev.predict_all(&ts));
    }

    #[test]
    fn relabeling_permutes_predictions() {
        let (s, l) = blobs(15, 2.5, 8);
        let perm = |r: RiskLabel| match r {
            RiskLabel::Dangerous => RiskLabel::JointlySafe,
            RiskLabel::JointlySafe => RiskLabel::Alert,
            RiskLabel::Alert => RiskLabel::IndependentlySafe,
            RiskLabel::IndependentlySafe => RiskLabel::Dangerous,
        };
        let l2: Vec<RiskLabel> = l.iter().map(|&r| perm(r)).collect();
        let a = svm_train_multiclass(&s, &l, &SvmSettings::default()).unwrap();
        let b = svm_train_multiclass(&s, &l2, &SvmSettings::default()).unwrap();
        let (ts, _) = blobs(40, 4.0, 9);
        let pa: Vec<RiskLabel> = a.predict_all(&ts).into_iter().map(perm).collect();
        assert_eq!(pa, b.predict_all(&ts));
    }

    #[test]
    fn folds_partition_indices() {
        let f = kfold_indices(23, 5, 9).unwrap();
        let mut all: Vec<usize> = f.concat();
        all.sort();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(f.iter().all(|x| x.len() == 4 || x.len() == 5));
        assert!(kfold_indices(3, 5, 0).is_err());
    }

    #[test]
    fn cross_validation_on_blobs() {
        let (s, l) = blobs(25, 0.5, 6);
        let r = cross_validate(&s, &l, &SvmSettings::default(), 5, 1).unwrap();
        assert_eq!(r.len(), 5);
        assert!(r.iter().all(|f| f.accuracy >= 0.95));
    }

    #[test]
    fn rejects_single_class() {
        let (s, _) = blobs(3, 0.5, 7);
        assert!(svm_train_multiclass(&s, &vec![RiskLabel::Alert; s.len()], &SvmSettings::default()).is_err());
    }
}
