//! Partitional and hierarchical clustering of daily GHI vectors.
//!
//! All four algorithms work on Euclidean distances and return a
//! [`Partition`] whose labels are canonicalized: clusters are numbered in
//! order of their first member, so results compare equal up to relabeling.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

mod hierarchical;
mod kmeans;
mod kmedoids;

pub use hierarchical::{
    ahc_average, average_linkage, best_bipartition_exhaustive, best_bipartition_heuristic,
    bipartition_score, dhc, divisive, Dendrogram, DendrogramStep, Direction, EXHAUSTIVE_SPLIT_MAX,
};
pub(crate) use hierarchical::hierarchical_objective;
pub use kmeans::{kmeans, kmeans_with_trace, KMeansConfig, KMeansTrace};
pub use kmedoids::{kmedoids, kmedoids_dm, kmedoids_with_trace};

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("cluster count {k} outside [1, {n}]")]
    KOutOfRange { k: usize, n: usize },
}

/// The clustering algorithms swept by the cluster-count search, in their
/// fixed tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    KMeans,
    KMedoids,
    Ahc,
    Dhc,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::KMeans, Method::KMedoids, Method::Ahc, Method::Dhc];

    pub fn name(self) -> &'static str {
        match self {
            Method::KMeans => "kmeans",
            Method::KMedoids => "kmedoids",
            Method::Ahc => "ahc",
            Method::Dhc => "dhc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown clustering method `{s}`"))
    }
}

/// Symmetric Euclidean distance matrix, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.n..(i + 1) * self.n]
    }
}

pub fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// All pairwise Euclidean distances between the rows of `x`.
pub fn pairwise_distances(x: &Array2<f64>) -> DistanceMatrix {
    let n = x.nrows();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = euclidean(x.row(i), x.row(j));
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    DistanceMatrix { n, d }
}

/// A hard assignment of `n` objects to `k` non-empty clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub method: Method,
    pub k: usize,
    pub labels: Vec<usize>,
    /// Cluster means (K-means only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centroids: Option<Vec<Vec<f64>>>,
    /// Object index of each cluster's medoid (K-medoids only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub medoids: Option<Vec<usize>>,
    /// Method-specific objective: summed distance to centroid / medoid, or the
    /// height of the last merge / split for the hierarchical methods.
    pub objective: f64,
}

impl Partition {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == cluster)
            .map(|(i, _)| i)
            .collect()
    }

    /// Checks the partition contract: labels in range, no empty cluster.
    pub fn is_valid(&self) -> bool {
        self.labels.iter().all(|&l| l < self.k) && self.sizes().iter().all(|&s| s > 0)
    }

    /// Per-cluster mean of the rows of `x`.
    pub fn cluster_means(&self, x: &Array2<f64>) -> Vec<Vec<f64>> {
        let d = x.ncols();
        let mut sums = vec![vec![0.0; d]; self.k];
        let sizes = self.sizes();
        for (i, &l) in self.labels.iter().enumerate() {
            for (s, v) in sums[l].iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        for (s, &n) in sums.iter_mut().zip(&sizes) {
            s.iter_mut().for_each(|v| *v /= n.max(1) as f64);
        }
        sums
    }
}

/// Renumbers labels by order of first appearance. Returns the new labels and
/// `old_to_new` so callers can permute per-cluster data.
pub(crate) fn canonicalize(labels: &[usize], k: usize) -> (Vec<usize>, Vec<usize>) {
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    let out = labels
        .iter()
        .map(|&l| {
            if map[l] == usize::MAX {
                map[l] = next;
                next += 1;
            }
            map[l]
        })
        .collect();
    (out, map)
}

/// Adjusted Rand index between two labelings of the same objects.
///
/// Two single-cluster labelings (or any identical pair) score 1.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&i, &j) in a.iter().zip(b) {
        table[i][j] += 1;
    }
    let c2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&x| c2(x)).sum();
    let rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(n as u64);
    let expected = if total > 0.0 { rows * cols / total } else { 0.0 };
    let max = (rows + cols) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

pub(crate) fn check_k(k: usize, n: usize) -> Result<(), ClusterError> {
    if k == 0 || k > n {
        Err(ClusterError::KOutOfRange { k, n })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn three_four_five() {
        let dm = pairwise_distances(&array![[0.0, 0.0], [3.0, 4.0]]);
        assert_eq!(dm.get(0, 1), 5.0);
        assert_eq!(dm.get(1, 0), 5.0);
        assert_eq!(dm.get(1, 1), 0.0);
    }

    #[test]
    fn canonical_labels() {
        let (l, map) = canonicalize(&[2, 2, 0, 1, 0], 3);
        assert_eq!(l, vec![0, 0, 1, 2, 1]);
        assert_eq!(map, vec![1, 2, 0]);
    }

    #[test]
    fn ari_cases() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        // Standard worked example: 0.24242...
        let a = [0, 0, 0, 1, 1, 1];
        let b = [0, 0, 1, 1, 2, 2];
        assert!((adjusted_rand_index(&a, &b) - 0.242_424_242_424_242_4).abs() < 1e-12);
        assert!(adjusted_rand_index(&[0, 1, 0, 1], &[0, 0, 1, 1]) < 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn distance_matrix_is_a_metric(
                pts in proptest::collection::vec(proptest::collection::vec(-100.0f64..100.0, 3), 1..12)
            ) {
                let n = pts.len();
                let x = Array2::from_shape_vec((n, 3), pts.concat()).unwrap();
                let dm = pairwise_distances(&x);
                for i in 0..n {
                    prop_assert_eq!(dm.get(i, i), 0.0);
                    for j in 0..n {
                        prop_assert_eq!(dm.get(i, j), dm.get(j, i));
                        for k in 0..n {
                            prop_assert!(dm.get(i, k) <= dm.get(i, j) + dm.get(j, k) + 1e-9);
                        }
                    }
                }
            }
        }
    }
}
