//! k-means with k-means++ seeding, Lloyd iterations and single-point
//! refinement moves.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sq_dist, RowMatrix};
use crate::rng;

pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub k: usize,
    pub centroids: RowMatrix,
    pub wcss: f64,
}

impl KMeansModel {
    /// Index of the nearest centroid; ties go to the lower index.
    pub fn nearest(&self, x: &[f64]) -> usize {
        nearest(&self.centroids, x).0
    }
}

/// One restart's trajectory, mostly useful for diagnostics and tests.
#[derive(Debug, Clone)]
pub struct KMeansRun {
    pub model: KMeansModel,
    pub assignment: Vec<usize>,
    /// WCSS after every centroid update, in order.
    pub history: Vec<f64>,
}

fn nearest(c: &RowMatrix, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, cj) in c.iter_rows().enumerate() {
        let d = sq_dist(x, cj);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

pub fn wcss(points: &RowMatrix, assignment: &[usize], centroids: &RowMatrix) -> f64 {
    points
        .iter_rows()
        .zip(assignment)
        .map(|(p, &a)| sq_dist(p, centroids.row(a)))
        .sum()
}

fn seed_plus_plus(points: &RowMatrix, k: usize, rng: &mut rng::Rng) -> RowMatrix {
    let n = points.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points.iter_rows().map(|p| sq_dist(p, points.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if *w <= 0.0 {
                    continue;
                }
                if target < *w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            if d2[pick] <= 0.0 {
                // floating-point leftovers fell past the last positive weight
                pick = d2.iter().rposition(|w| *w > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            // every point coincides with a chosen center
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, p) in points.iter_rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, points.row(next)));
        }
    }
    points.select_rows(&chosen)
}

fn update_centroids(points: &RowMatrix, assignment: &[usize], k: usize) -> (RowMatrix, Vec<usize>) {
    let dim = points.ncols();
    let mut c = RowMatrix::zeros(k, dim);
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter_rows().zip(assignment) {
        counts[a] += 1;
        for (s, v) in c.row_mut(a).iter_mut().zip(p) {
            *s += v;
        }
    }
    for (j, &cnt) in counts.iter().enumerate() {
        if cnt > 0 {
            for s in c.row_mut(j) {
                *s /= cnt as f64;
            }
        }
    }
    (c, counts)
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(points: &RowMatrix, assignment: &mut [usize], centroids: &mut RowMatrix, counts: &mut [usize]) {
    while let Some(empty) = counts.iter().position(|&c| c == 0) {
        let mut far = None;
        let mut far_d = -1.0;
        for (i, p) in points.iter_rows().enumerate() {
            let a = assignment[i];
            if counts[a] < 2 {
                continue;
            }
            let d = sq_dist(p, centroids.row(a));
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let Some(i) = far else { break };
        counts[assignment[i]] -= 1;
        assignment[i] = empty;
        counts[empty] = 1;
        let (c, cnt) = update_centroids(points, assignment, counts.len());
        *centroids = c;
        counts.copy_from_slice(&cnt);
    }
}

fn lloyd(points: &RowMatrix, mut centroids: RowMatrix, max_iter: usize) -> KMeansRun {
    let k = centroids.nrows();
    let mut assignment: Vec<usize> = points.iter_rows().map(|p| nearest(&centroids, p).0).collect();
    let mut history = Vec::new();
    let (c, mut counts) = update_centroids(points, &assignment, k);
    centroids = c;
    repair_empty(points, &mut assignment, &mut centroids, &mut counts);
    history.push(wcss(points, &assignment, &centroids));

    let mut iter = 0;
    loop {
        let mut changed = false;
        for (i, p) in points.iter_rows().enumerate() {
            let (j, d) = nearest(&centroids, p);
            // only move on a strict improvement so ties never cycle
            if j != assignment[i] && d < sq_dist(p, centroids.row(assignment[i])) {
                assignment[i] = j;
                changed = true;
            }
        }
        if changed {
            let (c, mut cnt) = update_centroids(points, &assignment, k);
            centroids = c;
            repair_empty(points, &mut assignment, &mut centroids, &mut cnt);
            counts = cnt;
            history.push(wcss(points, &assignment, &centroids));
        }
        iter += 1;
        if !changed || iter >= max_iter {
            if refine(points, &mut assignment, &mut centroids, &mut counts) {
                history.push(wcss(points, &assignment, &centroids));
                if iter < max_iter {
                    continue;
                }
            }
            break;
        }
    }
    let w = wcss(points, &assignment, &centroids);
    KMeansRun {
        model: KMeansModel { k, centroids, wcss: w },
        assignment,
        history,
    }
}

/// Single-point transfers that strictly lower WCSS even when Lloyd has stalled.
/// Returns whether anything moved.
fn refine(points: &RowMatrix, assignment: &mut [usize], centroids: &mut RowMatrix, counts: &mut [usize]) -> bool {
    let k = counts.len();
    let mut moved_any = false;
    loop {
        let mut moved = false;
        for (i, p) in points.iter_rows().enumerate() {
            let a = assignment[i];
            let na = counts[a] as f64;
            if counts[a] < 2 {
                continue;
            }
            let removal = na / (na - 1.0) * sq_dist(p, centroids.row(a));
            let mut best = (a, 0.0);
            for (b, &count) in counts.iter().enumerate() {
                if b == a {
                    continue;
                }
                let nb = count as f64;
                let delta = nb / (nb + 1.0) * sq_dist(p, centroids.row(b)) - removal;
                if delta < best.1 - 1e-12 * (1.0 + removal) {
                    best = (b, delta);
                }
            }
            if best.0 != a {
                assignment[i] = best.0;
                let (c, cnt) = update_centroids(points, assignment, k);
                *centroids = c;
                counts.copy_from_slice(&cnt);
                moved = true;
                moved_any = true;
            }
        }
        if !moved {
            return moved_any;
        }
    }
}

/// Best of `restarts` seeded runs by WCSS; ties go to the earliest restart.
pub fn kmeans(points: &RowMatrix, k: usize, restarts: usize, seed: u64) -> Result<(KMeansModel, Vec<usize>)> {
    let run = kmeans_runs(points, k, restarts, seed, DEFAULT_MAX_ITER)?
        .into_iter()
        .reduce(|best, r| if r.model.wcss < best.model.wcss { r } else { best })
        .expect("at least one restart");
    Ok((run.model, run.assignment))
}

pub fn kmeans_runs(points: &RowMatrix, k: usize, restarts: usize, seed: u64, max_iter: usize) -> Result<Vec<KMeansRun>> {
    let n = points.nrows();
    if k == 0 {
        return Err(Error::invalid("k-means needs K >= 1"));
    }
    if k > n {
        return Err(Error::invalid(format!("K = {k} exceeds the number of points ({n})")));
    }
    if restarts == 0 {
        return Err(Error::invalid("k-means needs at least one restart"));
    }
    if points.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite coordinate in k-means input"));
    }
    Ok((0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, "kmeans", r as u64);
            let init = seed_plus_plus(points, k, &mut rng);
            lloyd(points, init, max_iter.max(1))
        })
        .collect())
}
