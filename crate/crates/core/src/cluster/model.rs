//! Fitting, model selection and method comparison on feature states.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{select_features, FeatureState, FeatureVariant};
use crate::kernel::KernelKind;
use crate::linalg::RowMatrix;
use crate::rng;
use crate::sim::percentile_sorted;
use crate::standardize::Standardizer;

use super::criteria::{aic, bic, silhouette};
use super::kmeans::{kmeans, KMeansModel};
use super::kpca::{kpca_fit, KpcaModel, RetainedDims};
use super::risk::{assign_semantic_labels, ClusterProfile, RiskLabel};
use super::spectral::{spectral_cluster, LaplacianKind, SpectralParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClusterMethod {
    KpcaKmc,
    Spectral,
}

impl fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClusterMethod::KpcaKmc => "kpca-kmc",
            ClusterMethod::Spectral => "spectral",
        })
    }
}

impl FromStr for ClusterMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kpca-kmc" | "kpca" => Ok(ClusterMethod::KpcaKmc),
            "spectral" => Ok(ClusterMethod::Spectral),
            _ => Err(Error::invalid(format!(
                "unknown clustering method '{s}' (expected kpca-kmc or spectral)"
            ))),
        }
    }
}

/// Everything that shapes a clustering run apart from K and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSettings {
    pub variant: FeatureVariant,
    pub standardize: bool,
    pub kernel: KernelKind,
    pub gamma: Option<f64>,
    pub coef0: f64,
    pub dims: RetainedDims,
    pub restarts: usize,
    /// Rows used to fit the kernel PCA (and for spectral clustering); larger
    /// inputs are subsampled deterministically.
    pub max_fit_rows: usize,
    pub k_nn: usize,
    pub sigma: Option<f64>,
    pub laplacian: LaplacianKind,
}

impl Default for ClusterSettings {
    fn default() -> Self {
        Self {
            variant: FeatureVariant::All,
            standardize: true,
            kernel: KernelKind::Gaussian,
            gamma: None,
            coef0: 1.0,
            dims: RetainedDims::default(),
            restarts: 10,
            max_fit_rows: 1000,
            k_nn: 10,
            sigma: None,
            laplacian: LaplacianKind::SymmetricNormalized,
        }
    }
}

impl ClusterSettings {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::invalid("restarts must be at least 1"));
        }
        if self.max_fit_rows < 2 {
            return Err(Error::invalid("max_fit_rows must be at least 2"));
        }
        if self.k_nn == 0 {
            return Err(Error::invalid("k_nn must be at least 1"));
        }
        Ok(())
    }

    fn spectral_params(&self, k: usize) -> SpectralParams {
        SpectralParams {
            k_nn: self.k_nn,
            sigma: self.sigma,
            k,
            laplacian: self.laplacian,
            restarts: self.restarts,
        }
    }
}

/// Standardized points, the fit subsample and kernel PCA scores for every row.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub standardizer: Standardizer,
    pub points: RowMatrix,
    pub fit_rows: Vec<usize>,
    pub kpca: KpcaModel,
    pub scores: RowMatrix,
}

/// Deterministic subsample of `0..n` of size `min(n, cap)`, sorted.
pub fn subsample_indices(n: usize, cap: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    if n > cap {
        let mut r = rng::stream(seed, "subsample", 0);
        idx.shuffle(&mut r);
        idx.truncate(cap);
        idx.sort_unstable();
    }
    idx
}

pub fn prepare(raw: &RowMatrix, settings: &ClusterSettings, seed: u64) -> Result<Prepared> {
    settings.validate()?;
    if raw.nrows() < 2 {
        return Err(Error::invalid("clustering needs at least two rows"));
    }
    if raw.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite feature value in clustering input"));
    }
    let standardizer = if settings.standardize {
        Standardizer::fit(raw)?
    } else {
        Standardizer::identity(raw.ncols())
    };
    let points = standardizer.apply(raw);
    let fit_rows = subsample_indices(points.nrows(), settings.max_fit_rows, seed);
    let fit = points.select_rows(&fit_rows);
    let kernel = settings.kernel.resolve(&fit, settings.gamma, settings.coef0);
    let dims = match settings.dims {
        RetainedDims::Fixed(d) => RetainedDims::Fixed(d.min(fit.nrows())),
        v => v,
    };
    let kpca = kpca_fit(&fit, kernel, dims)?;
    let scores = kpca.project_all(&points)?;
    Ok(Prepared {
        standardizer,
        points,
        fit_rows,
        kpca,
        scores,
    })
}

fn cluster_means(points: &RowMatrix, assignment: &[usize], k: usize) -> RowMatrix {
    let mut c = RowMatrix::zeros(k, points.ncols());
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter_rows().zip(assignment) {
        counts[a] += 1;
        c.row_mut(a).iter_mut().zip(p).for_each(|(s, v)| *s += v);
    }
    for (j, &n) in counts.iter().enumerate() {
        if n > 0 {
            c.row_mut(j).iter_mut().for_each(|s| *s /= n as f64);
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionRow {
    pub k: usize,
    pub aic: f64,
    pub bic: f64,
    pub silhouette: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub k: usize,
    pub table: Vec<CriterionRow>,
}

/// Index of the smallest BIC; ties go to the smaller K.
pub fn argmin_bic(table: &[CriterionRow]) -> Option<usize> {
    table
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.bic.total_cmp(&b.1.bic).then(a.1.k.cmp(&b.1.k)))
        .map(|(i, _)| i)
}

/// Fits every K in `ks` and picks the BIC minimizer.
///
/// For kernel PCA + k-means the criteria are taken in the retained kernel PCA
/// space where the clustering happens. Spectral clusters are scored in the
/// standardized feature space with cluster means as centroids, since its
/// embedding dimension changes with K. Silhouettes always use the standardized
/// feature space so they are comparable between methods.
pub fn select_k(
    raw: &RowMatrix,
    ks: std::ops::RangeInclusive<usize>,
    method: ClusterMethod,
    settings: &ClusterSettings,
    seed: u64,
) -> Result<Selection> {
    let prep = prepare(raw, settings, seed)?;
    let (lo, hi) = (*ks.start(), *ks.end());
    if lo < 2 || hi < lo {
        return Err(Error::invalid(format!("K range {lo}..={hi} must start at 2 or more")));
    }
    let m = match method {
        ClusterMethod::KpcaKmc => prep.points.nrows(),
        ClusterMethod::Spectral => prep.fit_rows.len(),
    };
    if hi > m {
        return Err(Error::invalid(format!("K = {hi} exceeds the number of rows ({m})")));
    }
    let table: Vec<CriterionRow> = (lo..=hi)
        .into_par_iter()
        .map(|k| -> Result<CriterionRow> {
            let job_seed = rng::derive_seed(seed, "select-k", k as u64);
            match method {
                ClusterMethod::KpcaKmc => {
                    let (model, assignment) = kmeans(&prep.scores, k, settings.restarts, job_seed)?;
                    let sil = silhouette(&prep.points, &assignment)?;
                    Ok(CriterionRow {
                        k,
                        aic: aic(&prep.scores, &assignment, &model.centroids),
                        bic: bic(&prep.scores, &assignment, &model.centroids),
                        silhouette: sil.mean,
                    })
                }
                ClusterMethod::Spectral => {
                    let pts = prep.points.select_rows(&prep.fit_rows);
                    let r = spectral_cluster(&pts, &settings.spectral_params(k), job_seed)?;
                    let c = cluster_means(&pts, &r.assignment, k);
                    let sil = silhouette(&pts, &r.assignment)?;
                    Ok(CriterionRow {
                        k,
                        aic: aic(&pts, &r.assignment, &c),
                        bic: bic(&pts, &r.assignment, &c),
                        silhouette: sil.mean,
                    })
                }
            }
        })
        .collect::<Result<_>>()?;
    let best = argmin_bic(&table).expect("non-empty range");
    Ok(Selection {
        k: table[best].k,
        table,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub k: usize,
    pub kpca_silhouette: f64,
    pub spectral_silhouette: f64,
    pub chosen: ClusterMethod,
    /// Smallest eigenvalues of the spectral Laplacian, ascending.
    pub laplacian_eigenvalues: Vec<f64>,
    pub eigengap_k: usize,
}

/// Runs both methods at K and keeps the one with the higher mean silhouette
/// (kernel PCA + k-means on ties). Both silhouettes are measured on the same
/// rows in standardized feature space.
pub fn compare_methods(raw: &RowMatrix, k: usize, settings: &ClusterSettings, seed: u64) -> Result<Comparison> {
    if k < 2 {
        return Err(Error::invalid("method comparison needs K >= 2"));
    }
    let prep = prepare(raw, settings, seed)?;
    let (_, kpca_assign) = kmeans(&prep.scores, k, settings.restarts, rng::derive_seed(seed, "compare", 0))?;
    let pts = prep.points.select_rows(&prep.fit_rows);
    let spec = spectral_cluster(&pts, &settings.spectral_params(k), rng::derive_seed(seed, "compare", 1))?;
    let kpca_on_fit: Vec<usize> = prep.fit_rows.iter().map(|&i| kpca_assign[i]).collect();
    let kpca_silhouette = silhouette(&pts, &compact_labels(&kpca_on_fit))?.mean;
    let spectral_silhouette = silhouette(&pts, &spec.assignment)?.mean;
    let chosen = if spectral_silhouette > kpca_silhouette {
        ClusterMethod::Spectral
    } else {
        ClusterMethod::KpcaKmc
    };
    Ok(Comparison {
        k,
        kpca_silhouette,
        spectral_silhouette,
        chosen,
        laplacian_eigenvalues: spec.eigenvalues,
        eigengap_k: spec.eigengap_k,
    })
}

/// Renumbers labels to 0..m in order of first appearance, dropping gaps left
/// by clusters that have no member in a subsample.
fn compact_labels(a: &[usize]) -> Vec<usize> {
    let mut map = std::collections::BTreeMap::new();
    a.iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    percentile_sorted(&v, 0.5)
}

/// Medians of the raw features per cluster.
pub fn cluster_profiles(states: &[FeatureState], assignment: &[usize], k: usize) -> Vec<ClusterProfile> {
    (0..k)
        .map(|g| {
            let members: Vec<&FeatureState> = states
                .iter()
                .zip(assignment)
                .filter(|(_, &a)| a == g)
                .map(|(s, _)| s)
                .collect();
            let col = |f: fn(&FeatureState) -> f64| {
                if members.is_empty() {
                    f64::NAN
                } else {
                    median(members.iter().map(|s| f(s)).collect())
                }
            };
            ClusterProfile {
                size: members.len(),
                px: col(|s| s.px),
                py: col(|s| s.py),
                vx: col(|s| s.vx),
                vy: col(|s| s.vy),
                ttc: col(|s| s.ttc),
            }
        })
        .collect()
}

/// Deployed labeler: standardization, kernel PCA, k-means centroids and the
/// cluster-to-risk map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub method: ClusterMethod,
    pub variant: FeatureVariant,
    pub standardizer: Standardizer,
    pub kpca: KpcaModel,
    pub kmeans: KMeansModel,
    pub profiles: Vec<ClusterProfile>,
    /// Risk label per cluster; present when K = 4 or supplied by the user.
    pub labels: Option<Vec<RiskLabel>>,
}

/// A fitted model together with the training assignment.
#[derive(Debug, Clone)]
pub struct ClusterFit {
    pub model: ClusterModel,
    pub assignment: Vec<usize>,
}

impl ClusterModel {
    /// Clusters `states` on the configured feature variant with kernel PCA and
    /// k-means, then names the clusters when K = 4.
    pub fn fit(states: &[FeatureState], k: usize, settings: &ClusterSettings, seed: u64) -> Result<ClusterFit> {
        let raw = variant_matrix(states, settings.variant);
        let prep = prepare(&raw, settings, seed)?;
        let (km, assignment) = kmeans(&prep.scores, k, settings.restarts, rng::derive_seed(seed, "cluster", 0))?;
        let profiles = cluster_profiles(states, &assignment, k);
        let labels = if k == 4 { Some(assign_semantic_labels(&profiles)?) } else { None };
        Ok(ClusterFit {
            model: ClusterModel {
                method: ClusterMethod::KpcaKmc,
                variant: settings.variant,
                standardizer: prep.standardizer,
                kpca: prep.kpca,
                kmeans: km,
                profiles,
                labels,
            },
            assignment,
        })
    }

    pub fn k(&self) -> usize {
        self.kmeans.k
    }

    /// Replaces the rule-derived names with a user map (one label per cluster).
    pub fn with_labels(mut self, labels: Vec<RiskLabel>) -> Result<Self> {
        if labels.len() != self.k() {
            return Err(Error::invalid(format!(
                "label map has {} entries for {} clusters",
                labels.len(),
                self.k()
            )));
        }
        if self.k() == 4 {
            let mut seen = labels.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != 4 {
                return Err(Error::invalid("label map for 4 clusters must use each risk level once"));
            }
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn assign(&self, state: &FeatureState) -> Result<usize> {
        let x = self.standardizer.apply_row(&select_features(state, self.variant));
        let z = self.kpca.project(&x)?;
        Ok(self.kmeans.nearest(&z))
    }

    pub fn risk(&self, state: &FeatureState) -> Result<RiskLabel> {
        let c = self.assign(state)?;
        self.label_of(c)
    }

    pub fn label_of(&self, cluster: usize) -> Result<RiskLabel> {
        self.labels
            .as_ref()
            .and_then(|l| l.get(cluster).copied())
            .ok_or_else(|| Error::invalid(format!("cluster {cluster} has no risk label")))
    }
}

pub fn variant_matrix(states: &[FeatureState], variant: FeatureVariant) -> RowMatrix {
    let rows: Vec<Vec<f64>> = states.iter().map(|s| select_features(s, variant)).collect();
    if rows.is_empty() {
        return RowMatrix::zeros(0, variant.dim());
    }
    RowMatrix::from_rows(&rows).expect("rows share the variant width")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::criteria::adjusted_rand_index;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn planted(centers: &[[f64; 2]], per: usize, sd: f64, seed: u64) -> (RowMatrix, Vec<usize>) {
        let mut r = rng::stream(seed, "planted", 0);
        let noise = Normal::new(0.0, sd).unwrap();
        let mut rows = vec![];
        let mut truth = vec![];
        for (c, ctr) in centers.iter().enumerate() {
            for _ in 0..per {
                rows.push(vec![ctr[0] + noise.sample(&mut r), ctr[1] + noise.sample(&mut r)]);
                truth.push(c);
            }
        }
        (RowMatrix::from_rows(&rows).unwrap(), truth)
    }

    #[test]
    fn four_blobs_select_four() {
        let (x, _) = planted(&[[0.0, 0.0], [6.0, 0.0], [0.0, 6.0], [6.0, 6.0]], 40, 0.5, 3);
        let s = select_k(&x, 2..=7, ClusterMethod::KpcaKmc, &ClusterSettings::default(), 1).unwrap();
        assert_eq!(s.table.len(), 6);
        assert_eq!(s.k, 4, "{:?}", s.table);
    }

    #[test]
    fn convex_blobs_favor_kpca() {
        let (x, _) = planted(&[[0.0, 0.0], [5.0, 1.0], [2.0, 6.0]], 50, 0.6, 8);
        let c = compare_methods(&x, 3, &ClusterSettings::default(), 2).unwrap();
        assert!(c.kpca_silhouette >= c.spectral_silhouette - 1e-12, "{c:?}");
        assert!((-1.0..=1.0).contains(&c.kpca_silhouette));
        assert!((-1.0..=1.0).contains(&c.spectral_silhouette));
        assert_eq!(c.chosen, ClusterMethod::KpcaKmc);
    }

    #[test]
    fn ties_prefer_smaller_k() {
        let t = [
            CriterionRow { k: 2, aic: 0.0, bic: 5.0, silhouette: 0.0 },
            CriterionRow { k: 3, aic: 0.0, bic: 4.0, silhouette: 0.0 },
            CriterionRow { k: 4, aic: 0.0, bic: 4.0, silhouette: 0.0 },
        ];
        assert_eq!(argmin_bic(&t), Some(1));
    }

    #[test]
    fn subsample_is_deterministic_and_capped() {
        let a = subsample_indices(50, 20, 4);
        assert_eq!(a.len(), 20);
        assert_eq!(a, subsample_indices(50, 20, 4));
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(subsample_indices(5, 20, 4), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn fit_labels_planted_states() {
        let mut r = rng::stream(5, "states", 0);
        let mut states = vec![];
        let mut truth = vec![];
        // near/urgent, far/urgent, near/relaxed, far/relaxed
        let regimes = [
            [5.0, 2.0, -3.0, -1.3, 1.5],
            [35.0, -6.0, -5.5, 1.5, 2.0],
            [6.0, 4.0, -1.0, 0.0, 8.0],
            [30.0, 5.0, 0.5, 1.4, 10.0],
        ];
        for (g, c) in regimes.iter().enumerate() {
            for _ in 0..40 {
                states.push(FeatureState {
                    px: c[0] + r.random_range(-1.0..1.0),
                    py: c[1] + r.random_range(-0.5..0.5),
                    vx: c[2] + r.random_range(-0.2..0.2),
                    vy: c[3] + r.random_range(-0.2..0.2),
                    ttc: c[4] + r.random_range(-0.3..0.0),
                });
                truth.push(g);
            }
        }
        let fit = ClusterModel::fit(&states, 4, &ClusterSettings::default(), 6).unwrap();
        assert_eq!(adjusted_rand_index(&fit.assignment, &truth).unwrap(), 1.0);
        let expect = [RiskLabel::Dangerous, RiskLabel::Alert, RiskLabel::JointlySafe, RiskLabel::IndependentlySafe];
        for (i, s) in states.iter().enumerate() {
            assert_eq!(fit.model.assign(s).unwrap(), fit.assignment[i]);
            assert_eq!(fit.model.risk(s).unwrap(), expect[truth[i]]);
        }
        let m = fit.model.clone();
        assert!(m.clone().with_labels(vec![RiskLabel::Alert; 4]).is_err());
        let swapped = m.with_labels(vec![RiskLabel::Alert, RiskLabel::Dangerous, RiskLabel::JointlySafe, RiskLabel::IndependentlySafe]).unwrap();
        assert_eq!(swapped.label_of(1).unwrap(), RiskLabel::Dangerous);
    }
}
