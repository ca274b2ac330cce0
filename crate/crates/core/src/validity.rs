//! Internal cluster validity indices: connectivity, silhouette width and
//! the Dunn index.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{DistanceMatrix, Partition};

/// Default neighborhood size for connectivity.
pub const DEFAULT_NEIGHBORS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum ValidityError {
    #[error("neighbor count {n_b} must satisfy 1 <= n_b < {n}")]
    NbOutOfRange { n_b: usize, n: usize },
    #[error("silhouette needs at least two clusters")]
    SingleCluster,
    #[error("every cluster has zero diameter")]
    ZeroDiameter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityScores {
    pub conn: f64,
    pub silh: f64,
    pub dunn: f64,
}

/// Connectivity: for every object, each of its `n_b` nearest neighbors that
/// sits in a different cluster adds `1/j` (j = neighbor rank). Lower is better.
///
/// Neighbors at equal distance are ranked by object index.
pub fn connectivity(part: &Partition, dm: &DistanceMatrix, n_b: usize) -> Result<f64, ValidityError> {
    let n = dm.n();
    if n_b == 0 || n_b >= n {
        return Err(ValidityError::NbOutOfRange { n_b, n });
    }
    let mut conn = 0.0;
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        let row = dm.row(i);
        order.select_nth_unstable_by(n_b - 1, |&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        let nearest = &mut order[..n_b];
        nearest.sort_unstable_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        for (rank, &j) in nearest.iter().enumerate() {
            if part.labels[j] != part.labels[i] {
                conn += 1.0 / (rank + 1) as f64;
            }
        }
    }
    Ok(conn)
}

/// Mean silhouette width. Average within- and between-cluster distances are
/// divided by the full cluster size (the object counts in its own cluster).
pub fn silhouette(part: &Partition, dm: &DistanceMatrix) -> Result<f64, ValidityError> {
    let k = part.k;
    if k < 2 {
        return Err(ValidityError::SingleCluster);
    }
    let n = dm.n();
    let sizes = part.sizes();
    let mut sums = vec![0.0; k];
    let mut total = 0.0;
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        let row = dm.row(i);
        for (j, &l) in part.labels.iter().enumerate() {
            sums[l] += row[j];
        }
        let own = part.labels[i];
        let d_a = sums[own] / sizes[own] as f64;
        let d_b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = d_a.max(d_b);
        if denom > 0.0 {
            total += (d_b - d_a) / denom;
        }
    }
    Ok(total / n as f64)
}

/// Smallest between-cluster pair distance over largest cluster diameter.
pub fn dunn(part: &Partition, dm: &DistanceMatrix) -> Result<f64, ValidityError> {
    if part.k < 2 {
        return Err(ValidityError::SingleCluster);
    }
    let n = dm.n();
    let mut min_between = f64::INFINITY;
    let mut max_within: f64 = 0.0;
    for i in 0..n {
        let row = dm.row(i);
        for j in (i + 1)..n {
            if part.labels[i] == part.labels[j] {
                max_within = max_within.max(row[j]);
            } else {
                min_between = min_between.min(row[j]);
            }
        }
    }
    if max_within <= 0.0 {
        return Err(ValidityError::ZeroDiameter);
    }
    Ok(min_between / max_within)
}

pub fn score_all(part: &Partition, dm: &DistanceMatrix, n_b: usize) -> Result<ValidityScores, ValidityError> {
    Ok(ValidityScores {
        conn: connectivity(part, dm, n_b)?,
        silh: silhouette(part, dm)?,
        dunn: dunn(part, dm)?,
    })
}
