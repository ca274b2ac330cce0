use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{canonicalize, check_k, pairwise_distances, ClusterError, DistanceMatrix, Method, Partition};

pub fn kmedoids(x: &Array2<f64>, k: usize, seed: u64, max_iter: usize) -> Result<Partition, ClusterError> {
    kmedoids_dm(&pairwise_distances(x), k, seed, max_iter)
}

pub fn kmedoids_dm(dm: &DistanceMatrix, k: usize, seed: u64, max_iter: usize) -> Result<Partition, ClusterError> {
    kmedoids_with_trace(dm, k, seed, max_iter).map(|(p, _)| p)
}

struct Assignment {
    labels: Vec<usize>,
    nearest: Vec<f64>,
    second: Vec<f64>,
    cost: f64,
}

fn assign(dm: &DistanceMatrix, medoids: &[usize]) -> Assignment {
    let n = dm.n();
    let mut labels = vec![0; n];
    let mut nearest = vec![f64::INFINITY; n];
    let mut second = vec![f64::INFINITY; n];
    for i in 0..n {
        for (c, &m) in medoids.iter().enumerate() {
            let d = dm.get(i, m);
            if d < nearest[i] {
                second[i] = nearest[i];
                nearest[i] = d;
                labels[i] = c;
            } else if d < second[i] {
                second[i] = d;
            }
        }
    }
    let cost = nearest.iter().sum();
    Assignment { labels, nearest, second, cost }
}

/// Within-cluster argmin of summed distance; keeps the current medoid on ties.
fn update_medoids(dm: &DistanceMatrix, labels: &[usize], medoids: &mut [usize]) {
    for (c, m) in medoids.iter_mut().enumerate() {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        let cost = |cand: usize| members.iter().map(|&j| dm.get(cand, j)).sum::<f64>();
        let mut best = *m;
        let mut best_cost = cost(*m);
        for &cand in &members {
            let v = cost(cand);
            if v < best_cost {
                best = cand;
                best_cost = v;
            }
        }
        *m = best;
    }
}

/// Random starts refined in addition to the farthest-first and greedy ones.
const RANDOM_STARTS: usize = 3;

fn farthest_first(dm: &DistanceMatrix, k: usize, first: usize) -> Vec<usize> {
    let mut medoids = vec![first];
    while medoids.len() < k {
        let mut best = None;
        let mut best_d = -1.0;
        for i in 0..dm.n() {
            if medoids.contains(&i) {
                continue;
            }
            let d = medoids.iter().map(|&m| dm.get(i, m)).fold(f64::INFINITY, f64::min);
            if d > best_d {
                best_d = d;
                best = Some(i);
            }
        }
        medoids.push(best.expect("k <= n"));
    }
    medoids
}

/// Greedy build: each new medoid is the object that lowers the total
/// distance the most.
fn greedy_build(dm: &DistanceMatrix, k: usize) -> Vec<usize> {
    let n = dm.n();
    let mut nearest = vec![f64::INFINITY; n];
    let mut medoids = Vec::with_capacity(k);
    while medoids.len() < k {
        let mut best = (usize::MAX, f64::INFINITY);
        for x in (0..n).filter(|x| !medoids.contains(x)) {
            let cost: f64 = (0..n).map(|o| nearest[o].min(dm.get(o, x))).sum();
            if cost < best.1 {
                best = (x, cost);
            }
        }
        medoids.push(best.0);
        for (o, v) in nearest.iter_mut().enumerate() {
            *v = v.min(dm.get(o, best.0));
        }
    }
    medoids
}

/// Alternating assignment / medoid update, then best-improvement swaps of
/// a medoid with a non-medoid until no swap lowers the total distance.
fn refine(dm: &DistanceMatrix, mut medoids: Vec<usize>, max_iter: usize) -> (Assignment, Vec<usize>, Vec<f64>) {
    let (n, k) = (dm.n(), medoids.len());
    let mut a = assign(dm, &medoids);
    let mut trace = vec![a.cost];

    for _ in 0..max_iter {
        let before = medoids.clone();
        update_medoids(dm, &a.labels, &mut medoids);
        if medoids == before {
            break;
        }
        a = assign(dm, &medoids);
        trace.push(a.cost);
    }

    for _ in 0..max_iter {
        // delta of swapping medoid slot `c` for object `x`
        let mut best: Option<(usize, usize)> = None;
        let mut best_delta = -1e-12 * a.cost.max(1.0);
        for x in 0..n {
            if medoids.contains(&x) {
                continue;
            }
            for c in 0..k {
                let mut delta = 0.0;
                for o in 0..n {
                    let dx = dm.get(o, x);
                    let now = a.nearest[o];
                    let new = if a.labels[o] == c { dx.min(a.second[o]) } else { now.min(dx) };
                    delta += new - now;
                }
                if delta < best_delta {
                    best_delta = delta;
                    best = Some((c, x));
                }
            }
        }
        let Some((c, x)) = best else { break };
        medoids[c] = x;
        a = assign(dm, &medoids);
        trace.push(a.cost);
    }
    (a, medoids, trace)
}

/// Refines a seeded farthest-first start, a greedy-build start and a few
/// seeded random starts, keeping the lowest total distance (earliest start
/// on ties). The trace holds the objective after every accepted step of
/// the kept run.
pub fn kmedoids_with_trace(
    dm: &DistanceMatrix,
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<(Partition, Vec<f64>), ClusterError> {
    let n = dm.n();
    check_k(k, n)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![farthest_first(dm, k, rng.random_range(0..n)), greedy_build(dm, k)];
    for _ in 0..RANDOM_STARTS {
        starts.push(rand::seq::index::sample(&mut rng, n, k).into_vec());
    }
    let mut best: Option<(Assignment, Vec<usize>, Vec<f64>)> = None;
    for s in starts {
        let run = refine(dm, s, max_iter);
        if best.as_ref().is_none_or(|b| run.0.cost < b.0.cost) {
            best = Some(run);
        }
    }
    let (a, medoids, trace) = best.expect("at least one start");

    let (labels, map) = canonicalize(&a.labels, k);
    let mut ordered = vec![0; k];
    for (old, m) in medoids.iter().enumerate() {
        ordered[map[old]] = *m;
    }
    Ok((
        Partition {
            method: Method::KMedoids,
            k,
            labels,
            centroids: None,
            medoids: Some(ordered),
            objective: a.cost,
        },
        trace,
    ))
}
