//! k-means++ clustering and the repeated clustering protocol.

use super::classify::EvalError;
use super::metrics::{ari, mean_std, nmi};
use crate::matrix::Matrix;
use crate::rng::substream;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

pub const MAX_ITERATIONS: usize = 300;
/// k-means++ starts per run; the lowest-inertia start is kept.
pub const N_INIT: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignment: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
    pub iterations: usize,
    /// Times an empty cluster's centroid was moved to a new point, summed
    /// over all starts.
    pub empty_reinits: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(row: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, cen) in centroids.row_iter().enumerate() {
        let d = sq_dist(row, cen);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus<R: Rng>(x: &Matrix, k: usize, rng: &mut R) -> Matrix {
    let n = x.rows();
    let mut centroids = Matrix::zeros(k, x.cols());
    let first = rng.gen_range(0..n);
    centroids.row_mut(0).copy_from_slice(x.row(first));
    let mut dist: Vec<f64> = x.row_iter().map(|r| sq_dist(r, x.row(first))).collect();
    for c in 1..k {
        let pick = match WeightedIndex::new(&dist) {
            Ok(w) => w.sample(rng),
            // Every point coincides with a chosen centroid.
            Err(_) => rng.gen_range(0..n),
        };
        centroids.row_mut(c).copy_from_slice(x.row(pick));
        for (d, r) in dist.iter_mut().zip(x.row_iter()) {
            *d = d.min(sq_dist(r, x.row(pick)));
        }
    }
    centroids
}

/// Best of [`N_INIT`] k-means++ starts by inertia; ties keep the earlier start.
pub fn kmeans<R: Rng>(x: &Matrix, k: usize, rng: &mut R) -> Result<KMeansResult, EvalError> {
    let n = x.rows();
    if k == 0 || k > n {
        return Err(EvalError::BadK { k, n });
    }
    let mut best = lloyd(x, k, rng);
    let mut reinits = best.empty_reinits;
    for _ in 1..N_INIT {
        let r = lloyd(x, k, rng);
        reinits += r.empty_reinits;
        if r.inertia < best.inertia {
            best = r;
        }
    }
    best.empty_reinits = reinits;
    Ok(best)
}

/// Lloyd iterations from a k-means++ start, stopping when assignments no
/// longer change or after [`MAX_ITERATIONS`]. An empty cluster takes the
/// point farthest from its current centroid.
fn lloyd<R: Rng>(x: &Matrix, k: usize, rng: &mut R) -> KMeansResult {
    let (n, d) = x.shape();
    let mut centroids = plus_plus(x, k, rng);
    let mut assignment = vec![usize::MAX; n];
    let mut empty_reinits = 0;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let next: Vec<(usize, f64)> = x.row_iter().map(|r| nearest(r, &centroids)).collect();
        let changed = next.iter().zip(&assignment).any(|(a, &b)| a.0 != b);
        for (slot, (c, _)) in assignment.iter_mut().zip(&next) {
            *slot = *c;
        }
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums.row_mut(c).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        let mut reinit = false;
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| next[a].1.total_cmp(&next[b].1).then(b.cmp(&a)))
                    .expect("n > 0");
                centroids.row_mut(c).copy_from_slice(x.row(far));
                empty_reinits += 1;
                reinit = true;
            } else {
                for (cv, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *cv = s / counts[c] as f64;
                }
            }
        }
        if !changed && !reinit {
            break;
        }
    }
    let inertia = x.row_iter().zip(&assignment).map(|(r, &c)| sq_dist(r, centroids.row(c))).sum();
    KMeansResult { assignment, centroids, inertia, iterations, empty_reinits }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusteringScores {
    pub nmi: Vec<f64>,
    pub ari: Vec<f64>,
    pub empty_reinits: usize,
}

impl ClusteringScores {
    pub fn nmi_mean_std(&self) -> (f64, f64) {
        mean_std(&self.nmi)
    }

    pub fn ari_mean_std(&self) -> (f64, f64) {
        mean_std(&self.ari)
    }
}

/// Runs seeded k-means `repeats` times (substream `kmeans-{r}`) and scores
/// each run against `labels`.
pub fn evaluate_clustering(z: &Matrix, labels: &[usize], k: usize, repeats: usize, seed: u64) -> Result<ClusteringScores, EvalError> {
    if z.rows() != labels.len() {
        return Err(EvalError::LabelCount { embedded: z.rows(), labels: labels.len() });
    }
    let runs: Vec<KMeansResult> = (0..repeats)
        .into_par_iter()
        .map(|r| kmeans(z, k, &mut substream(seed, &format!("kmeans-{r}"))))
        .collect::<Result<_, _>>()?;
    Ok(ClusteringScores {
        nmi: runs.iter().map(|r| nmi(labels, &r.assignment)).collect(),
        ari: runs.iter().map(|r| ari(labels, &r.assignment)).collect(),
        empty_reinits: runs.iter().map(|r| r.empty_reinits).sum(),
    })
}
