//! Kernel principal component analysis.
//!
//! The kernel matrix is double-centered and eigendecomposed. With eigenpairs
//! `(lambda_j, v_j)` of the centered kernel, the training score of row `i`
//! along component `j` is `sqrt(lambda_j) * v_j[i]`, the same scaling as
//! ordinary PCA scores. Out-of-sample rows are projected with the centered
//! kernel vector dotted with `v_j / sqrt(lambda_j)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::linalg::{sorted_symmetric_eigen, RowMatrix};

/// How many components to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RetainedDims {
    Fixed(usize),
    /// Smallest count whose eigenvalue mass reaches the fraction, at least 2.
    Variance(f64),
}

impl Default for RetainedDims {
    fn default() -> Self {
        RetainedDims::Variance(0.95)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpcaModel {
    pub kernel: KernelSpec,
    pub train: RowMatrix,
    /// Mean of each kernel-matrix row over the training set.
    pub row_means: Vec<f64>,
    pub grand_mean: f64,
    /// All eigenvalues of the centered kernel matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// `n x d` projection coefficients, row-major.
    pub coeffs: RowMatrix,
    pub dims: usize,
}

fn sqrt_eps_floor(lambda1: f64, n: usize) -> f64 {
    lambda1.abs() * 1e-12 * n as f64
}

pub fn kpca_fit(x: &RowMatrix, kernel: KernelSpec, dims: RetainedDims) -> Result<KpcaModel> {
    kernel.validate()?;
    let n = x.nrows();
    if n == 0 {
        return Err(Error::invalid("kernel PCA needs at least one row"));
    }
    if let RetainedDims::Fixed(d) = dims {
        if d == 0 || d > n {
            return Err(Error::invalid(format!(
                "retained dimension {d} must be in [1, {n}]"
            )));
        }
    }
    if let RetainedDims::Variance(f) = dims {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::invalid(format!("variance fraction {f} must be in (0, 1]")));
        }
    }

    let k = kernel.gram(x);
    let row_means: Vec<f64> = k.chunks_exact(n).map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let grand_mean = row_means.iter().sum::<f64>() / n as f64;
    let centered = DMatrix::from_fn(n, n, |i, j| {
        k[i * n + j] - row_means[i] - row_means[j] + grand_mean
    });
    let (eigenvalues, vectors) = sorted_symmetric_eigen(centered)?;
    let lambda1 = eigenvalues[0].max(0.0);
    if let Some(bad) = eigenvalues.iter().find(|&&l| l < -1e-8 * lambda1.max(1.0)) {
        return Err(Error::numerical(format!(
            "centered kernel matrix is not positive semidefinite (eigenvalue {bad})"
        )));
    }

    let d = match dims {
        RetainedDims::Fixed(d) => d,
        RetainedDims::Variance(frac) => {
            let total: f64 = eigenvalues.iter().map(|l| l.max(0.0)).sum();
            let mut acc = 0.0;
            let mut d = n;
            if total > 0.0 {
                for (j, l) in eigenvalues.iter().enumerate() {
                    acc += l.max(0.0);
                    if acc >= frac * total {
                        d = j + 1;
                        break;
                    }
                }
            }
            d.max(2).min(n)
        }
    };

    let floor = sqrt_eps_floor(lambda1, n);
    let mut coeffs = RowMatrix::zeros(n, d);
    for j in 0..d {
        let l = eigenvalues[j];
        if l <= floor {
            continue;
        }
        let inv = 1.0 / l.sqrt();
        for i in 0..n {
            coeffs.row_mut(i)[j] = vectors[(i, j)] * inv;
        }
    }

    Ok(KpcaModel {
        kernel,
        train: x.clone(),
        row_means,
        grand_mean,
        eigenvalues,
        coeffs,
        dims: d,
    })
}

impl KpcaModel {
    /// Share of the centered-kernel eigenvalue mass captured by the kept components.
    pub fn explained_ratio(&self) -> f64 {
        let total: f64 = self.eigenvalues.iter().map(|l| l.max(0.0)).sum();
        if total <= 0.0 {
            return 1.0;
        }
        self.eigenvalues[..self.dims].iter().map(|l| l.max(0.0)).sum::<f64>() / total
    }

    pub fn project(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.train.ncols() {
            return Err(Error::invalid(format!(
                "projection input has dimension {}, model expects {}",
                s.len(),
                self.train.ncols()
            )));
        }
        Ok(self.project_unchecked(s))
    }

    fn project_unchecked(&self, s: &[f64]) -> Vec<f64> {
        let n = self.train.nrows();
        let kv: Vec<f64> = self.train.iter_rows().map(|r| self.kernel.eval_unchecked(s, r)).collect();
        let kmean = kv.iter().sum::<f64>() / n as f64;
        let mut out = vec![0.0; self.dims];
        for (i, kval) in kv.iter().enumerate() {
            let c = kval - kmean - self.row_means[i] + self.grand_mean;
            for (o, a) in out.iter_mut().zip(self.coeffs.row(i)) {
                *o += c * a;
            }
        }
        out
    }

    pub fn project_all(&self, x: &RowMatrix) -> Result<RowMatrix> {
        use rayon::prelude::*;
        if x.ncols() != self.train.ncols() {
            return Err(Error::invalid(format!(
                "projection input has dimension {}, model expects {}",
                x.ncols(),
                self.train.ncols()
            )));
        }
        let rows: Vec<Vec<f64>> = (0..x.nrows())
            .into_par_iter()
            .map(|i| self.project_unchecked(x.row(i)))
            .collect();
        if rows.is_empty() {
            return Ok(RowMatrix::zeros(0, self.dims));
        }
        RowMatrix::from_rows(&rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn random_rows(seed: u64, n: usize, d: usize) -> RowMatrix {
        let mut r = rng::stream(seed, "test", 0);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| r.random_range(-2.0..2.0)).collect())
            .collect();
        RowMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn centered_kernel_rows_sum_to_zero() {
        let x = random_rows(1, 30, 3);
        let m = kpca_fit(&x, KernelSpec::Gaussian { gamma: 0.5 }, RetainedDims::Fixed(3)).unwrap();
        let n = x.nrows();
        let k = m.kernel.gram(&x);
        for i in 0..n {
            let s: f64 = (0..n)
                .map(|j| k[i * n + j] - m.row_means[i] - m.row_means[j] + m.grand_mean)
                .sum();
            assert!(s.abs() < 1e-8);
        }
    }

    #[test]
    fn full_retention_explains_everything() {
        let x = random_rows(2, 25, 2);
        let m = kpca_fit(&x, KernelSpec::Gaussian { gamma: 1.0 }, RetainedDims::Fixed(25)).unwrap();
        assert!((m.explained_ratio() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn training_rows_reproduce_fitted_scores() {
        let x = random_rows(3, 20, 3);
        let m = kpca_fit(&x, KernelSpec::Gaussian { gamma: 0.3 }, RetainedDims::Fixed(4)).unwrap();
        let proj = m.project_all(&x).unwrap();
        let (vals, vecs) = {
            let n = x.nrows();
            let k = m.kernel.gram(&x);
            let c = DMatrix::from_fn(n, n, |i, j| k[i * n + j] - m.row_means[i] - m.row_means[j] + m.grand_mean);
            sorted_symmetric_eigen(c).unwrap()
        };
        for i in 0..x.nrows() {
            for j in 0..4 {
                let fitted = vals[j].sqrt() * vecs[(i, j)];
                assert!((proj.row(i)[j] - fitted).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn linear_projection_is_affine() {
        let x = random_rows(4, 15, 3);
        let m = kpca_fit(&x, KernelSpec::Linear, RetainedDims::Fixed(2)).unwrap();
        let a = [0.3, -1.0, 0.5];
        let b = [1.1, 0.2, -0.7];
        let mid: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect();
        let pa = m.project(&a).unwrap();
        let pb = m.project(&b).unwrap();
        let pm = m.project(&mid).unwrap();
        for j in 0..2 {
            assert!((pm[j] - 0.5 * (pa[j] + pb[j])).abs() < 1e-10);
        }
    }

    #[test]
    fn far_point_projects_to_centering_constant() {
        let x = random_rows(5, 15, 2);
        let m = kpca_fit(&x, KernelSpec::Gaussian { gamma: 2.0 }, RetainedDims::Fixed(3)).unwrap();
        let far = m.project(&[100.0, 100.0]).unwrap();
        // kernel vector vanishes: centered entries are grand_mean - row_mean_i
        for j in 0..3 {
            let expect: f64 = (0..15)
                .map(|i| (m.grand_mean - m.row_means[i]) * m.coeffs.row(i)[j])
                .sum();
            assert!((far[j] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_rows_keep_directions() {
        let x = random_rows(6, 12, 2);
        let mut rows: Vec<Vec<f64>> = x.iter_rows().map(|r| r.to_vec()).collect();
        rows.extend(x.iter_rows().map(|r| r.to_vec()));
        let x2 = RowMatrix::from_rows(&rows).unwrap();
        let k = KernelSpec::Gaussian { gamma: 0.8 };
        let m1 = kpca_fit(&x, k, RetainedDims::Fixed(3)).unwrap();
        let m2 = kpca_fit(&x2, k, RetainedDims::Fixed(3)).unwrap();
        let p1 = m1.project_all(&x).unwrap();
        let p2 = m2.project_all(&x).unwrap();
        for j in 0..3 {
            let sign = if p1.row(0)[j] * p2.row(0)[j] < 0.0 { -1.0 } else { 1.0 };
            for i in 0..x.nrows() {
                assert!((p1.row(i)[j] - sign * p2.row(i)[j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn variance_rule_has_floor_of_two() {
        // two tight, distant groups: one dominant component
        let mut rows = vec![];
        for i in 0..10 {
            rows.push(vec![0.0 + 1e-3 * i as f64, 0.0]);
            rows.push(vec![10.0 + 1e-3 * i as f64, 0.0]);
        }
        let x = RowMatrix::from_rows(&rows).unwrap();
        let m = kpca_fit(&x, KernelSpec::Linear, RetainedDims::Variance(0.95)).unwrap();
        assert_eq!(m.dims, 2);
        assert!(kpca_fit(&x, KernelSpec::Linear, RetainedDims::Fixed(0)).is_err());
        assert!(m.project(&[1.0]).is_err());
    }
}
