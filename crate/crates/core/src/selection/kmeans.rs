use super::similarity::squared_distance;
use crate::error::{Result, VenomError};
use crate::seed::{derive_seed, rng};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITERS: usize = 300;
/// A single Lloyd run from random points of `z` often stops in a local optimum.
pub const DEFAULT_RESTARTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub s: usize,
    pub inertia: f64,
    /// Inertia after each centroid update.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl KMeansModel {
    /// Index of the nearest centroid; ties go to the lower index.
    pub fn nearest(&self, z: &[f64]) -> usize {
        nearest(&self.centroids, z)
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == cluster).collect()
    }
}

fn nearest(centroids: &[Vec<f64>], z: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(c, z);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

fn inertia(z: &[Vec<f64>], centroids: &[Vec<f64>], labels: &[usize]) -> f64 {
    z.iter().zip(labels).map(|(p, &l)| squared_distance(p, &centroids[l])).sum()
}

fn check_points(z: &[Vec<f64>], s: usize) -> Result<usize> {
    let dim = z.first().map(Vec::len).unwrap_or(0);
    if dim == 0 || z.iter().any(|p| p.len() != dim) {
        return Err(VenomError::Contract("points must be non-empty vectors of one length".into()));
    }
    if s < 2 || s > z.len() {
        return Err(VenomError::Contract(format!("cluster count {s} outside 2..={}", z.len())));
    }
    Ok(dim)
}

/// Move the point farthest from its centroid into each empty cluster, taking
/// it from a cluster that keeps at least one member.
fn repair_empty(z: &[Vec<f64>], centroids: &mut [Vec<f64>], labels: &mut [usize]) {
    let s = centroids.len();
    loop {
        let mut counts = vec![0usize; s];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let far = (0..z.len())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&a, &b| {
                let da = squared_distance(&z[a], &centroids[labels[a]]);
                let db = squared_distance(&z[b], &centroids[labels[b]]);
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("some cluster has two members when one is empty");
        labels[far] = empty;
        centroids[empty] = z[far].clone();
    }
}

fn fit_once(z: &[Vec<f64>], s: usize, seed: u64, max_iters: usize, tol: f64) -> KMeansModel {
    let dim = z[0].len();
    let init = rand::seq::index::sample(&mut rng(seed), z.len(), s);
    let mut centroids: Vec<Vec<f64>> = init.iter().map(|i| z[i].clone()).collect();
    let mut labels: Vec<usize> = z.iter().map(|p| nearest(&centroids, p)).collect();
    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        repair_empty(z, &mut centroids, &mut labels);
        let mut sums = vec![vec![0.0; dim]; s];
        let mut counts = vec![0usize; s];
        for (p, &l) in z.iter().zip(&labels) {
            counts[l] += 1;
            for (acc, v) in sums[l].iter_mut().zip(p) {
                *acc += v;
            }
        }
        let mut movement: f64 = 0.0;
        for j in 0..s {
            let mean: Vec<f64> = sums[j].iter().map(|v| v / counts[j] as f64).collect();
            movement = movement.max(squared_distance(&mean, &centroids[j]).sqrt());
            centroids[j] = mean;
        }
        history.push(inertia(z, &centroids, &labels));
        let next: Vec<usize> = z.iter().map(|p| nearest(&centroids, p)).collect();
        let stable = next == labels;
        labels = next;
        if stable || movement < tol {
            break;
        }
    }
    repair_empty(z, &mut centroids, &mut labels);
    let final_inertia = inertia(z, &centroids, &labels);
    KMeansModel {
        centroids,
        labels,
        s,
        inertia: final_inertia,
        inertia_history: history,
        iterations,
    }
}

/// Lloyd's algorithm from `s` distinct points of `z`; with `restarts > 1`
/// the lowest-inertia fit wins (earliest on ties).
pub fn kmeans_fit(
    z: &[Vec<f64>],
    s: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
    restarts: usize,
) -> Result<KMeansModel> {
    check_points(z, s)?;
    let mut best: Option<KMeansModel> = None;
    for r in 0..restarts.max(1) {
        let m = fit_once(z, s, derive_seed(seed, "kmeans.init", r as u64), max_iters.max(1), tol);
        if best.as_ref().is_none_or(|b| m.inertia < b.inertia) {
            best = Some(m);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Mean silhouette; singleton-cluster points score 0.
pub fn silhouette(z: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if z.len() != labels.len() || z.is_empty() {
        return Err(VenomError::Contract("one label per point required".into()));
    }
    let s = labels.iter().max().map(|m| m + 1).unwrap_or(0);
    let mut counts = vec![0usize; s];
    for &l in labels {
        counts[l] += 1;
    }
    if s < 2 || counts.contains(&0) {
        return Err(VenomError::Contract(format!(
            "silhouette needs at least two non-empty clusters, got sizes {counts:?}"
        )));
    }
    let n = z.len();
    let mut total = 0.0;
    let mut sums = vec![0.0; s];
    for i in 0..n {
        sums.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            if i != j {
                sums[labels[j]] += squared_distance(&z[i], &z[j]).sqrt();
            }
        }
        let own = labels[i];
        if counts[own] == 1 {
            continue;
        }
        let a = sums[own] / (counts[own] - 1) as f64;
        let b = (0..s)
            .filter(|&c| c != own)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChosenS {
    pub s: usize,
    pub silhouette: f64,
    pub model: KMeansModel,
    /// `(s, silhouette)` for every candidate evaluated.
    pub scores: Vec<(usize, f64)>,
    pub degenerate: bool,
}

/// Fit every `s` in `low..=high` and keep the best mean silhouette (smallest `s` on ties).
pub fn choose_s(
    z: &[Vec<f64>],
    low: usize,
    high: usize,
    seed: u64,
    restarts: usize,
) -> Result<ChosenS> {
    if low < 2 || low > high || high >= z.len() {
        return Err(VenomError::Contract(format!(
            "cluster range {low}..={high} invalid for {} points",
            z.len()
        )));
    }
    let mut best: Option<ChosenS> = None;
    let mut scores = Vec::new();
    for s in low..=high {
        let model = kmeans_fit(z, s, derive_seed(seed, "choose_s", s as u64), DEFAULT_MAX_ITERS, DEFAULT_TOL, restarts)?;
        let score = silhouette(z, &model.labels)?;
        scores.push((s, score));
        if best.as_ref().is_none_or(|b| score > b.silhouette) {
            best = Some(ChosenS {
                s,
                silhouette: score,
                model,
                scores: Vec::new(),
                degenerate: false,
            });
        }
    }
    let mut best = best.expect("non-empty range");
    best.degenerate = z.iter().all(|p| p == &z[0]);
    best.scores = scores;
    Ok(best)
}
