use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RowMatrix;

/// Per-column affine map to zero mean and unit variance.
///
/// Constant columns keep a scale of 1 so they map to 0 instead of NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &RowMatrix) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::invalid("cannot standardize an empty matrix"));
        }
        let mean = x.column_means();
        let n = x.nrows() as f64;
        let mut var = vec![0.0; x.ncols()];
        for r in x.iter_rows() {
            for ((v, m), acc) in r.iter().zip(&mean).zip(var.iter_mut()) {
                *acc += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    /// Identity map of the given dimension.
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn apply(&self, x: &RowMatrix) -> RowMatrix {
        let mut out = x.clone();
        for i in 0..out.nrows() {
            let r = self.apply_row(x.row(i));
            out.row_mut(i).copy_from_slice(&r);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_mean_unit_variance() {
        let x = RowMatrix::from_rows(&[vec![1.0, 5.0], vec![3.0, 5.0], vec![5.0, 5.0]]).unwrap();
        let s = Standardizer::fit(&x).unwrap();
        let z = s.apply(&x);
        let m = z.column_means();
        assert!(m[0].abs() < 1e-12 && m[1].abs() < 1e-12);
        let var0: f64 = z.iter_rows().map(|r| r[0] * r[0]).sum::<f64>() / 3.0;
        assert!((var0 - 1.0).abs() < 1e-12);
        // constant column maps to zero
        assert!(z.iter_rows().all(|r| r[1] == 0.0));
    }
}
