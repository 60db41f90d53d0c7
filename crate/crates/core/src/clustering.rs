//! Lloyd's K-means with seeded multi-restart and optional z-score scaling.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RESTARTS: usize = 16;
pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub objective: f64,
    /// Objective after each update step of the winning restart.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Per-cluster point counts.
    pub sizes: Vec<usize>,
}

impl KMeansResult {
    pub fn empty_clusters(&self) -> Vec<usize> {
        self.sizes
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == 0)
            .map(|(k, _)| k)
            .collect()
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_dims(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Result<usize> {
    let dim = centroids
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidConfig("at least one centroid is required".into()))?;
    if let Some(bad) = points.iter().chain(centroids).find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} among {dim}-dimensional points",
            bad.len()
        )));
    }
    Ok(dim)
}

/// Nearest-centroid assignment; exact ties go to the smaller index.
pub fn assign_step(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Result<Vec<usize>> {
    check_dims(points, centroids)?;
    Ok(points.iter().map(|p| nearest(p, centroids)).collect())
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter().enumerate() {
        let d = squared_distance(p, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best.0
}

/// Moves each non-empty cluster's centroid to the mean of its points.
/// Empty clusters keep their previous centroid.
pub fn update_step(
    points: &[Vec<f64>],
    assignments: &[usize],
    centroids: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let dim = check_dims(points, centroids)?;
    if assignments.len() != points.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} assignments for {} points",
            assignments.len(),
            points.len()
        )));
    }
    let k = centroids.len();
    if let Some(&a) = assignments.iter().find(|&&a| a >= k) {
        return Err(Error::DimensionMismatch(format!(
            "assignment {a} with only {k} clusters"
        )));
    }
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        sums[a].iter_mut().zip(p).for_each(|(s, x)| *s += x);
    }
    Ok(sums
        .into_iter()
        .zip(&counts)
        .zip(centroids)
        .map(|((sum, &count), old)| {
            if count == 0 {
                old.clone()
            } else {
                sum.into_iter().map(|s| s / count as f64).collect()
            }
        })
        .collect())
}

/// Sum of squared distances from each point to its assigned centroid.
pub fn objective(points: &[Vec<f64>], assignments: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| squared_distance(p, &centroids[a]))
        .sum()
}

fn cluster_sizes(assignments: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    sizes
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> KMeansResult {
    let k = centroids.len();
    let mut assignments: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        centroids = update_step(points, &assignments, &centroids).expect("dimensions checked");
        history.push(objective(points, &assignments, &centroids));
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
    }
    let objective = objective(points, &assignments, &centroids);
    KMeansResult {
        sizes: cluster_sizes(&assignments, k),
        centroids,
        assignments,
        objective,
        objective_history: history,
        iterations,
        converged,
    }
}

/// Multi-restart K-means. Each restart seeds its centroids with `k` distinct
/// data points drawn from a generator on stream `restart` of `seed`; the
/// lowest objective wins (earliest restart on ties).
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iter: usize,
    restarts: usize,
) -> Result<KMeansResult> {
    if k == 0 || max_iter == 0 || restarts == 0 {
        return Err(Error::InvalidConfig(
            "k, max_iter and restarts must all be at least 1".into(),
        ));
    }
    if points.len() < k {
        return Err(Error::TooFewPoints {
            found: points.len(),
            k,
        });
    }
    let dim = points[0].len();
    if let Some(bad) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} among {dim}-dimensional points",
            bad.len()
        )));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("clustering features".into()));
    }
    if k > 1 && points.iter().all(|p| p == &points[0]) {
        return Err(Error::DegenerateInput { k });
    }

    let mut best: Option<KMeansResult> = None;
    for restart in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64);
        let init = sample(&mut rng, points.len(), k)
            .into_iter()
            .map(|i| points[i].clone())
            .collect();
        let run = lloyd(points, init, max_iter);
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// Per-feature z-score parameters, kept so new points map consistently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    /// Fits means and sample standard deviations; constant features get scale 1.
    pub fn fit(points: &[Vec<f64>]) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(Error::TooFewRows(n));
        }
        let dim = points[0].len();
        let mut means = vec![0.0; dim];
        for p in points {
            means.iter_mut().zip(p).for_each(|(m, x)| *m += x / n as f64);
        }
        let scales = (0..dim)
            .map(|j| {
                let var = points.iter().map(|p| (p[j] - means[j]).powi(2)).sum::<f64>()
                    / (n - 1) as f64;
                let sd = var.sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { means, scales })
    }

    pub fn identity(dim: usize) -> Self {
        Standardizer {
            means: vec![0.0; dim],
            scales: vec![1.0; dim],
        }
    }

    pub fn transform(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn inverse(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(x, (m, s))| x * s + m)
            .collect()
    }
}
