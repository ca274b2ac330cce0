use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{canonicalize, check_k, ClusterError, Method, Partition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub seed: u64,
    pub max_iter: usize,
    /// Relative change of the within-cluster sum of squares that stops iteration.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self { seed: 0, max_iter: 300, tol: 1e-6 }
    }
}

/// Per-iteration objective values.
///
/// `sse` is the within-cluster sum of squared distances, the quantity the
/// mean update minimizes; it is non-increasing. `distance_sum` is the
/// summed (unsquared) distance to the assigned centroid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KMeansTrace {
    pub sse: Vec<f64>,
    pub distance_sum: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded farthest-first traversal: random start, then repeatedly the row
/// farthest from all chosen rows (ties to the lowest index).
fn farthest_first(rows: &[&[f64]], k: usize, seed: u64) -> Vec<usize> {
    let n = rows.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..n);
    let mut chosen = vec![first];
    let mut nearest: Vec<f64> = rows.iter().map(|r| sq_dist(r, rows[first])).collect();
    while chosen.len() < k {
        let mut best = None;
        for i in 0..n {
            if chosen.contains(&i) {
                continue;
            }
            if best.is_none_or(|b: usize| nearest[i] > nearest[b]) {
                best = Some(i);
            }
        }
        let b = best.expect("k <= n");
        chosen.push(b);
        for i in 0..n {
            nearest[i] = nearest[i].min(sq_dist(rows[i], rows[b]));
        }
    }
    chosen
}

fn assign(rows: &[&[f64]], centroids: &[Vec<f64>], labels: &mut [usize]) -> (f64, f64) {
    let mut sse = 0.0;
    let mut dist = 0.0;
    for (i, r) in rows.iter().enumerate() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, cen) in centroids.iter().enumerate() {
            let d = sq_dist(r, cen);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        labels[i] = best;
        sse += best_d;
        dist += best_d.sqrt();
    }
    (sse, dist)
}

fn objectives(rows: &[&[f64]], centroids: &[Vec<f64>], labels: &[usize]) -> (f64, f64) {
    rows.iter().zip(labels).fold((0.0, 0.0), |(s, d), (r, &l)| {
        let q = sq_dist(r, &centroids[l]);
        (s + q, d + q.sqrt())
    })
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(rows: &[&[f64]], centroids: &mut [Vec<f64>], labels: &mut [usize], k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        labels.iter().for_each(|&l| sizes[l] += 1);
        let Some(empty) = sizes.iter().position(|&s| s == 0) else { return };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, r) in rows.iter().enumerate() {
            if sizes[labels[i]] < 2 {
                continue;
            }
            let d = sq_dist(r, &centroids[labels[i]]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let i = far.expect("n >= k guarantees a donor cluster");
        labels[i] = empty;
        centroids[empty] = rows[i].to_vec();
    }
}

fn update_centroids(rows: &[&[f64]], labels: &[usize], k: usize, d: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (r, &l) in rows.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(r.iter()) {
            *s += v;
        }
    }
    for (s, c) in sums.iter_mut().zip(counts) {
        s.iter_mut().for_each(|v| *v /= c as f64);
    }
    sums
}

/// Lloyd's algorithm with farthest-first seeding.
pub fn kmeans(x: &Array2<f64>, k: usize, cfg: &KMeansConfig) -> Result<Partition, ClusterError> {
    kmeans_with_trace(x, k, cfg).map(|(p, _)| p)
}

pub fn kmeans_with_trace(
    x: &Array2<f64>,
    k: usize,
    cfg: &KMeansConfig,
) -> Result<(Partition, KMeansTrace), ClusterError> {
    let (n, d) = x.dim();
    check_k(k, n)?;
    let owned = x.as_standard_layout();
    let rows: Vec<&[f64]> = owned.as_slice().expect("standard layout").chunks(d.max(1)).take(n).collect();
    let rows: Vec<&[f64]> = if d == 0 { vec![&[][..]; n] } else { rows };

    let mut centroids: Vec<Vec<f64>> = farthest_first(&rows, k, cfg.seed)
        .into_iter()
        .map(|i| rows[i].to_vec())
        .collect();
    let mut labels = vec![0usize; n];
    let mut trace = KMeansTrace::default();

    assign(&rows, &centroids, &mut labels);
    repair_empty(&rows, &mut centroids, &mut labels, k);
    let (sse, dist) = objectives(&rows, &centroids, &labels);
    trace.sse.push(sse);
    trace.distance_sum.push(dist);

    for _ in 0..cfg.max_iter {
        centroids = update_centroids(&rows, &labels, k, d);
        let before = labels.clone();
        assign(&rows, &centroids, &mut labels);
        repair_empty(&rows, &mut centroids, &mut labels, k);
        let (sse, dist) = objectives(&rows, &centroids, &labels);
        let prev = *trace.sse.last().unwrap();
        trace.sse.push(sse);
        trace.distance_sum.push(dist);
        let rel = if prev > 0.0 { (prev - sse).abs() / prev } else { 0.0 };
        if labels == before || rel < cfg.tol {
            break;
        }
    }
    centroids = update_centroids(&rows, &labels, k, d);
    let (_, objective) = objectives(&rows, &centroids, &labels);

    let (labels, map) = canonicalize(&labels, k);
    let mut ordered = vec![Vec::new(); k];
    for (old, c) in centroids.into_iter().enumerate() {
        ordered[map[old]] = c;
    }
    Ok((
        Partition {
            method: Method::KMeans,
            k,
            labels,
            centroids: Some(ordered),
            medoids: None,
            objective,
        },
        trace,
    ))
}
