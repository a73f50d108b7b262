//! Spectral clustering on a symmetrized k-nearest-neighbor graph.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist, sorted_symmetric_eigen, RowMatrix};
use crate::rng;

use super::kmeans::kmeans;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LaplacianKind {
    Unnormalized,
    SymmetricNormalized,
}

impl fmt::Display for LaplacianKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LaplacianKind::Unnormalized => "unnormalized",
            LaplacianKind::SymmetricNormalized => "symmetric",
        })
    }
}

impl FromStr for LaplacianKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unnormalized" => Ok(LaplacianKind::Unnormalized),
            "symmetric" | "sym" => Ok(LaplacianKind::SymmetricNormalized),
            _ => Err(Error::invalid(format!(
                "unknown laplacian '{s}' (expected unnormalized or symmetric)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    pub k_nn: usize,
    /// Gaussian similarity bandwidth; `None` uses the median edge length.
    pub sigma: Option<f64>,
    pub k: usize,
    pub laplacian: LaplacianKind,
    pub restarts: usize,
}

impl SpectralParams {
    pub fn new(k: usize) -> Self {
        Self {
            k_nn: 10,
            sigma: None,
            k,
            laplacian: LaplacianKind::SymmetricNormalized,
            restarts: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_nn == 0 {
            return Err(Error::invalid("k_nn must be at least 1"));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("sigma must be positive, got {s}")));
            }
        }
        if self.k == 0 {
            return Err(Error::invalid("spectral clustering needs K >= 1"));
        }
        if self.restarts == 0 {
            return Err(Error::invalid("spectral clustering needs at least one k-means restart"));
        }
        Ok(())
    }
}

/// Symmetric adjacency as sorted neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnnGraph {
    pub neighbors: Vec<Vec<usize>>,
}

impl KnnGraph {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Component index per node, numbered in order of first appearance.
    pub fn components(&self) -> Vec<usize> {
        let n = self.len();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            comp[start] = next;
            while let Some(u) = stack.pop() {
                for &v in &self.neighbors[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }
}

pub fn knn_graph(points: &RowMatrix, k_nn: usize) -> Result<KnnGraph> {
    let n = points.nrows();
    if k_nn == 0 {
        return Err(Error::invalid("k_nn must be at least 1"));
    }
    if n <= k_nn {
        return Err(Error::invalid(format!(
            "k-NN graph needs more than {k_nn} points, got {n}"
        )));
    }
    let nearest: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let pi = points.row(i);
            let mut d: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (dist(pi, points.row(j)), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.truncate(k_nn);
            d.into_iter().map(|(_, j)| j).collect()
        })
        .collect();
    let mut neighbors = vec![Vec::new(); n];
    for (i, list) in nearest.iter().enumerate() {
        for &j in list {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
    }
    for list in &mut neighbors {
        list.sort_unstable();
        list.dedup();
    }
    Ok(KnnGraph { neighbors })
}

/// Median Euclidean length over the graph's edges.
pub fn median_edge_length(points: &RowMatrix, graph: &KnnGraph) -> f64 {
    let mut d: Vec<f64> = Vec::new();
    for (i, list) in graph.neighbors.iter().enumerate() {
        for &j in list.iter().filter(|&&j| j > i) {
            d.push(dist(points.row(i), points.row(j)));
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    }
}

/// Dense graph Laplacian with Gaussian edge weights `exp(-d^2 / (2 sigma^2))`.
pub fn laplacian(points: &RowMatrix, graph: &KnnGraph, sigma: f64, kind: LaplacianKind) -> DMatrix<f64> {
    let n = graph.len();
    let mut w = DMatrix::zeros(n, n);
    for (i, list) in graph.neighbors.iter().enumerate() {
        for &j in list {
            let d = dist(points.row(i), points.row(j));
            w[(i, j)] = (-d * d / (2.0 * sigma * sigma)).exp();
        }
    }
    let deg: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    match kind {
        LaplacianKind::Unnormalized => {
            let mut l = -w;
            for i in 0..n {
                l[(i, i)] += deg[i];
            }
            l
        }
        LaplacianKind::SymmetricNormalized => {
            let inv: Vec<f64> = deg.iter().map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }).collect();
            DMatrix::from_fn(n, n, |i, j| {
                let id = if i == j && deg[i] > 0.0 { 1.0 } else { 0.0 };
                id - inv[i] * w[(i, j)] * inv[j]
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    pub assignment: Vec<usize>,
    /// Smallest Laplacian eigenvalues, ascending (at most ten).
    pub eigenvalues: Vec<f64>,
    /// Cluster count suggested by the largest gap among `eigenvalues`.
    pub eigengap_k: usize,
    pub sigma: f64,
    pub embedding: RowMatrix,
}

pub fn spectral_cluster(points: &RowMatrix, params: &SpectralParams, seed: u64) -> Result<SpectralResult> {
    params.validate()?;
    let n = points.nrows();
    if n < params.k {
        return Err(Error::invalid(format!(
            "K = {} exceeds the number of points ({n})",
            params.k
        )));
    }
    let graph = knn_graph(points, params.k_nn)?;
    let sigma = params.sigma.unwrap_or_else(|| median_edge_length(points, &graph));
    let sigma = if sigma > 0.0 { sigma } else { 1.0 };
    let lap = laplacian(points, &graph, sigma, params.laplacian);
    let (desc_vals, desc_vecs) = sorted_symmetric_eigen(lap)?;

    let k = params.k;
    let mut embedding = RowMatrix::zeros(n, k);
    for c in 0..k {
        let src = n - 1 - c;
        for i in 0..n {
            embedding.row_mut(i)[c] = desc_vecs[(i, src)];
        }
    }
    if params.laplacian == LaplacianKind::SymmetricNormalized {
        for i in 0..n {
            let row = embedding.row_mut(i);
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }

    let eigenvalues: Vec<f64> = desc_vals.iter().rev().take(10.min(n)).copied().collect();
    let eigengap_k = eigenvalues
        .windows(2)
        .enumerate()
        .max_by(|a, b| (a.1[1] - a.1[0]).total_cmp(&(b.1[1] - b.1[0])).then(b.0.cmp(&a.0)))
        .map_or(1, |(i, _)| i + 1);

    let (_, assignment) = kmeans(&embedding, k, params.restarts, rng::derive_seed(seed, "spectral", 0))?;
    Ok(SpectralResult {
        assignment,
        eigenvalues,
        eigengap_k,
        sigma,
        embedding,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::criteria::adjusted_rand_index;

    fn blobs(centers: &[(f64, f64)], per: usize, spread: f64) -> (RowMatrix, Vec<usize>) {
        let mut rows = vec![];
        let mut labels = vec![];
        for (c, (cx, cy)) in centers.iter().enumerate() {
            for i in 0..per {
                let t = i as f64 / per as f64 * std::f64::consts::TAU;
                rows.push(vec![cx + spread * t.cos() * (1.0 + 0.1 * i as f64), cy + spread * t.sin()]);
                labels.push(c);
            }
        }
        (RowMatrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn collinear_triplet() {
        let x = RowMatrix::new(3, 1, vec![0.0, 1.0, 2.5]).unwrap();
        let g = knn_graph(&x, 1).unwrap();
        assert!(g.has_edge(1, 0) && g.has_edge(1, 2));
        assert!(!g.has_edge(0, 2));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(g.has_edge(i, j), g.has_edge(j, i));
            }
        }
        assert!(knn_graph(&x, 3).is_err());
    }

    #[test]
    fn separated_blobs_make_components() {
        let (x, truth) = blobs(&[(0.0, 0.0), (100.0, 0.0)], 5, 1.0);
        let g = knn_graph(&x, 2).unwrap();
        let comp = g.components();
        assert_eq!(*comp.iter().max().unwrap(), 1);
        assert_eq!(adjusted_rand_index(&comp, &truth).unwrap(), 1.0);
    }

    #[test]
    fn null_space_counts_components() {
        let (x, truth) = blobs(&[(0.0, 0.0), (50.0, 50.0), (-60.0, 20.0)], 12, 2.0);
        let g = knn_graph(&x, 3).unwrap();
        assert_eq!(g.components().iter().max().copied(), Some(2));
        let l = laplacian(&x, &g, median_edge_length(&x, &g), LaplacianKind::Unnormalized);
        let (vals, _) = sorted_symmetric_eigen(l).unwrap();
        let zeros = vals.iter().filter(|v| v.abs() < 1e-8).count();
        assert_eq!(zeros, 3);
        for kind in [LaplacianKind::Unnormalized, LaplacianKind::SymmetricNormalized] {
            let p = SpectralParams { k_nn: 3, laplacian: kind, ..SpectralParams::new(3) };
            let r = spectral_cluster(&x, &p, 4).unwrap();
            assert_eq!(adjusted_rand_index(&r.assignment, &truth).unwrap(), 1.0);
            assert!(r.eigenvalues[2].abs() < 1e-8 && r.eigenvalues[3] > 1e-4);
        }
    }

    #[test]
    fn parses_laplacian_names() {
        assert_eq!("symmetric".parse::<LaplacianKind>().unwrap(), LaplacianKind::SymmetricNormalized);
        assert_eq!(LaplacianKind::Unnormalized.to_string().parse::<LaplacianKind>().unwrap(), LaplacianKind::Unnormalized);
        assert!("random-walk".parse::<LaplacianKind>().is_err());
    }
}
