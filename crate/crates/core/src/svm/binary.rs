//! Two-class soft-margin SVM trained with sequential minimal optimization.
//!
//! The dual is `min 1/2 a'Qa - e'a` subject to `0 <= a_i <= C` and `y'a = 0`,
//! with `Q_ij = y_i y_j K(x_i, x_j)`. Working pairs use the maximal-violating
//! index plus second-order selection of its partner; training stops once the
//! violation gap `m(a) - M(a)` drops to `tol`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::linalg::RowMatrix;

const TAU: f64 = 1e-12;
const MAX_ITER_FLOOR: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub kernel: KernelSpec,
    pub support_vectors: RowMatrix,
    /// `alpha_i * y_i` for each support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub tol: f64,
}

impl BinarySvm {
    /// `f(x) = sum_i alpha_i y_i K(x_i, x) + b`.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter_rows()
            .zip(&self.coef)
            .map(|(sv, c)| c * self.kernel.eval_unchecked(sv, x))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> i8 {
        if self.decision(x) >= 0.0 {
            1
        } else {
            -1
        }
    }
}

/// A trained machine together with the full dual solution.
#[derive(Debug, Clone)]
pub struct BinaryFit {
    pub svm: BinarySvm,
    /// Dual variable per training row (zero for non-support vectors).
    pub alpha: Vec<f64>,
    pub iterations: usize,
}

pub fn svm_train_binary(x: &RowMatrix, y: &[i8], kernel: KernelSpec, c: f64, tol: f64) -> Result<BinaryFit> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::invalid(format!("{} labels for {n} rows", y.len())));
    }
    if y.iter().any(|&v| v != 1 && v != -1) {
        return Err(Error::invalid("binary labels must be -1 or +1"));
    }
    if !y.contains(&1) || !y.contains(&-1) {
        return Err(Error::invalid("binary SVM needs both classes present"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!("C must be positive, got {c}")));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    kernel.validate()?;
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite value in SVM training data"));
    }

    let k = kernel.gram(x);
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let kd: Vec<f64> = (0..n).map(|i| k[i * n + i]).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = MAX_ITER_FLOOR.max(100 * n);
    let is_upper = |a: f64| a >= c;
    let is_lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    loop {
        // i: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let v = -yf[t] * grad[t];
            let in_up = if y[t] == 1 { !is_upper(alpha[t]) } else { !is_lower(alpha[t]) };
            if in_up && v > gmax {
                gmax = v;
                i_sel = Some(t);
            }
        }
        // j: second-order choice in I_low; also track M(a)
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        if let Some(i) = i_sel {
            let ki = &k[i * n..(i + 1) * n];
            for t in 0..n {
                let in_low = if y[t] == 1 { !is_lower(alpha[t]) } else { !is_upper(alpha[t]) };
                if !in_low {
                    continue;
                }
                let v = yf[t] * grad[t];
                gmax2 = gmax2.max(v);
                let diff = gmax + v;
                if diff > 0.0 {
                    let quad = (kd[i] + kd[t] - 2.0 * ki[t]).max(TAU);
                    let obj = -diff * diff / quad;
                    if obj < best_obj {
                        best_obj = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let (Some(i), Some(j)) = (i_sel, j_sel) else { break };
        if gmax + gmax2 <= tol {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::numerical(format!(
                "SMO did not converge within {max_iter} iterations (violation gap {})",
                gmax + gmax2
            )));
        }
        iterations += 1;

        let kij = k[i * n + j];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (kd[i] + kd[j] + 2.0 * (yf[i] * yf[j] * kij)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (kd[i] + kd[j] - 2.0 * (yf[i] * yf[j] * kij)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        let (ki, kj) = (&k[i * n..(i + 1) * n], &k[j * n..(j + 1) * n]);
        for t in 0..n {
            grad[t] += yf[t] * (yf[i] * ki[t] * di + yf[j] * kj[t] * dj);
        }
    }

    // rho: average of y_i G_i over free vectors, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut free_sum) = (0usize, 0.0);
    for t in 0..n {
        let yg = yf[t] * grad[t];
        if is_upper(alpha[t]) {
            if y[t] == -1 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if is_lower(alpha[t]) {
            if y[t] == 1 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 { free_sum / free as f64 } else { 0.5 * (ub + lb) };

    let sv: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    let svm = BinarySvm {
        kernel,
        support_vectors: if sv.is_empty() { RowMatrix::zeros(0, x.ncols()) } else { x.select_rows(&sv) },
        coef: sv.iter().map(|&t| alpha[t] * yf[t]).collect(),
        bias: -rho,
        c,
        tol,
    };
    Ok(BinaryFit { svm, alpha, iterations })
}

/// Largest KKT violation of a dual solution, measured on `y_i f(x_i)`.
///
/// Zero means `a_i = 0 => y f >= 1`, `0 < a_i < C => y f = 1` and
/// `a_i = C => y f <= 1` all hold exactly.
pub fn kkt_violation(svm: &BinarySvm, x: &RowMatrix, y: &[i8], alpha: &[f64]) -> f64 {
    (0..x.nrows())
        .into_par_iter()
        .map(|t| {
            let m = y[t] as f64 * svm.decision(x.row(t));
            if alpha[t] <= 0.0 {
                (1.0 - m).max(0.0)
            } else if alpha[t] >= svm.c {
                (m - 1.0).max(0.0)
            } else {
                (m - 1.0).abs()
            }
        })
        .reduce(|| 0.0, f64::max)
}
