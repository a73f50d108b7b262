//! Cluster validation: information criteria, silhouettes and the adjusted Rand index.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dist, RowMatrix};

pub use super::kmeans::wcss;

/// WCSS plus `2 K N`, with `N` the point dimension.
pub fn aic(points: &RowMatrix, assignment: &[usize], centroids: &RowMatrix) -> f64 {
    let penalty = (centroids.nrows() * points.ncols()) as f64;
    wcss(points, assignment, centroids) + 2.0 * penalty
}

/// WCSS plus `ln(M) K N`, with `M` the number of points.
pub fn bic(points: &RowMatrix, assignment: &[usize], centroids: &RowMatrix) -> f64 {
    let penalty = (centroids.nrows() * points.ncols()) as f64;
    wcss(points, assignment, centroids) + (points.nrows() as f64).ln() * penalty
}

#[derive(Debug, Clone, PartialEq)]
pub struct Silhouette {
    pub scores: Vec<f64>,
    pub mean: f64,
}

pub fn silhouette(points: &RowMatrix, assignment: &[usize]) -> Result<Silhouette> {
    let n = points.nrows();
    if assignment.len() != n {
        return Err(Error::invalid(format!(
            "assignment has {} labels for {n} points",
            assignment.len()
        )));
    }
    let k = assignment.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    assignment.iter().for_each(|&a| sizes[a] += 1);
    if k < 2 {
        return Err(Error::invalid("silhouette needs at least two clusters"));
    }
    if let Some(g) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::invalid(format!("cluster {g} is empty")));
    }
    let scores: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = assignment[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            let pi = points.row(i);
            for (j, pj) in points.iter_rows().enumerate() {
                if j != i {
                    sums[assignment[j]] += dist(pi, pj);
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&g| g != own)
                .map(|g| sums[g] / sizes[g] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom > 0.0 {
                (b - a) / denom
            } else {
                0.0
            }
        })
        .collect();
    let mean = scores.iter().sum::<f64>() / n as f64;
    Ok(Silhouette { scores, mean })
}

fn choose2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same points.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid("labelings differ in length"));
    }
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![0usize; ka * kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x * kb + y] += 1;
    }
    let mut rows = vec![0usize; ka];
    let mut cols = vec![0usize; kb];
    for x in 0..ka {
        for y in 0..kb {
            rows[x] += table[x * kb + y];
            cols[y] += table[x * kb + y];
        }
    }
    let index: f64 = table.iter().map(|&c| choose2(c)).sum();
    let sa: f64 = rows.iter().map(|&c| choose2(c)).sum();
    let sb: f64 = cols.iter().map(|&c| choose2(c)).sum();
    let total = choose2(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sa * sb / total;
    let max = 0.5 * (sa + sb);
    if (max - expected).abs() < 1e-12 {
        // both labelings trivial (all one cluster or all singletons)
        return Ok(if a == b { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}
