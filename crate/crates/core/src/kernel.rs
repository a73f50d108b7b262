//! Kernel functions shared by kernel PCA and the SVM classifier.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, sq_dist, RowMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    Polynomial { degree: u32, coef0: f64 },
    Gaussian { gamma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Polynomial { degree, coef0 } => {
                if degree == 0 || !coef0.is_finite() || coef0 < 0.0 {
                    Err(Error::invalid(format!(
                        "polynomial kernel needs degree >= 1 and coef0 >= 0, got {degree}, {coef0}"
                    )))
                } else {
                    Ok(())
                }
            }
            KernelSpec::Gaussian { gamma } => {
                if gamma.is_finite() && gamma > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("gaussian gamma must be positive, got {gamma}")))
                }
            }
        }
    }

    #[inline]
    pub fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(a, b),
            KernelSpec::Polynomial { degree, coef0 } => (dot(a, b) + coef0).powi(degree as i32),
            KernelSpec::Gaussian { gamma } => (-gamma * sq_dist(a, b)).exp(),
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::invalid(format!(
                "kernel arguments have dimensions {} and {}",
                a.len(),
                b.len()
            )));
        }
        Ok(self.eval_unchecked(a, b))
    }

    /// Full symmetric Gram matrix of the rows of `x`, row-major `n * n`.
    pub fn gram(&self, x: &RowMatrix) -> Vec<f64> {
        use rayon::prelude::*;
        let n = x.nrows();
        let mut k = vec![0.0; n * n];
        k.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.eval_unchecked(x.row(i), x.row(j));
            }
        });
        k
    }

    pub fn name(&self) -> String {
        match *self {
            KernelSpec::Linear => "linear".into(),
            KernelSpec::Polynomial { degree: 2, .. } => "quadratic".into(),
            KernelSpec::Polynomial { degree: 3, .. } => "cubic".into(),
            KernelSpec::Polynomial { degree, .. } => format!("poly{degree}"),
            KernelSpec::Gaussian { .. } => "gaussian".into(),
        }
    }
}

/// Kernel family as named in configuration; parameters resolved against data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    Linear,
    Quadratic,
    Cubic,
    Gaussian,
}

impl KernelKind {
    pub const ALL: [KernelKind; 4] = [
        KernelKind::Linear,
        KernelKind::Quadratic,
        KernelKind::Cubic,
        KernelKind::Gaussian,
    ];

    /// Builds a concrete kernel. `gamma = None` selects the scale heuristic
    /// `1 / (dim * var)` computed from `x`.
    pub fn resolve(self, x: &RowMatrix, gamma: Option<f64>, coef0: f64) -> KernelSpec {
        match self {
            KernelKind::Linear => KernelSpec::Linear,
            KernelKind::Quadratic => KernelSpec::Polynomial { degree: 2, coef0 },
            KernelKind::Cubic => KernelSpec::Polynomial { degree: 3, coef0 },
            KernelKind::Gaussian => KernelSpec::Gaussian {
                gamma: gamma.unwrap_or_else(|| scale_gamma(x)),
            },
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Linear => "linear",
            KernelKind::Quadratic => "quadratic",
            KernelKind::Cubic => "cubic",
            KernelKind::Gaussian => "gaussian",
        })
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KernelKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::invalid(format!("unknown kernel '{s}'")))
    }
}

/// `1 / (dim * variance of all entries)`, falling back to `1 / dim` for
/// constant data.
pub fn scale_gamma(x: &RowMatrix) -> f64 {
    let dim = x.ncols().max(1) as f64;
    let vals = x.as_slice();
    if vals.is_empty() {
        return 1.0 / dim;
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / (dim * var)
    } else {
        1.0 / dim
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_examples() {
        let g = KernelSpec::Gaussian { gamma: 0.7 };
        assert_eq!(g.eval(&[1.0, -2.0], &[1.0, -2.0]).unwrap(), 1.0);
        assert_eq!(KernelSpec::Linear.eval(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        let p = KernelSpec::Polynomial { degree: 2, coef0: 1.0 };
        assert_eq!(p.eval(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 4.0);
        assert!(KernelSpec::Linear.eval(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn gram_symmetric_unit_diagonal() {
        let x = RowMatrix::from_rows(&[vec![0.0, 1.0], vec![2.0, -1.0], vec![0.5, 0.5]]).unwrap();
        let k = KernelSpec::Gaussian { gamma: scale_gamma(&x) }.gram(&x);
        for i in 0..3 {
            assert_eq!(k[i * 3 + i], 1.0);
            for j in 0..3 {
                assert_eq!(k[i * 3 + j], k[j * 3 + i]);
            }
        }
    }

    #[test]
    fn validation() {
        assert!(KernelSpec::Gaussian { gamma: 0.0 }.validate().is_err());
        assert!(KernelSpec::Polynomial { degree: 0, coef0: 1.0 }.validate().is_err());
        assert!(KernelSpec::Polynomial { degree: 3, coef0: 1.0 }.validate().is_ok());
        assert_eq!("cubic".parse::<KernelKind>().unwrap(), KernelKind::Cubic);
        assert!("rbf".parse::<KernelKind>().is_err());
    }
}
