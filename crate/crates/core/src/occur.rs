//! Optimized cross-validated clustering: sweep cluster counts and methods,
//! score every partition with the three validity indices and pick the
//! cluster count by a ranked vote.
//!
//! For every method and every index the candidate counts are ranked; in
//! round `v` (1-based) the best remaining count receives `k_max - v` votes and
//! leaves that index's pool. Vote ties and rank ties favor the smaller count.

use std::collections::BTreeMap;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{
    average_linkage, divisive, kmeans, kmedoids_dm, pairwise_distances, ClusterError, DistanceMatrix, KMeansConfig,
    Method, Partition,
};
use crate::validity::{score_all, ValidityError, ValidityScores, DEFAULT_NEIGHBORS};

#[derive(Debug, Error, PartialEq)]
pub enum OccurError {
    #[error("k_max = {k_max} must satisfy 2 <= k_max <= n = {n}")]
    KMaxOutOfRange { k_max: usize, n: usize },
    #[error("evaluation grid is missing {method} at K = {k}")]
    IncompleteGrid { method: Method, k: usize },
    #[error("no clustering methods selected")]
    NoMethods,
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("{method} at K = {k}: {source}")]
    Validity { method: Method, k: usize, source: ValidityError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccurConfig {
    pub k_max: usize,
    pub n_neighbors: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for OccurConfig {
    fn default() -> Self {
        Self {
            k_max: 14,
            n_neighbors: DEFAULT_NEIGHBORS,
            seed: 0,
            methods: Method::ALL.to_vec(),
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub method: Method,
    pub k: usize,
    pub scores: ValidityScores,
    pub partition: Partition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationGrid {
    pub k_max: usize,
    pub methods: Vec<Method>,
    /// Method-major, then ascending K.
    pub cells: Vec<GridCell>,
}

impl EvaluationGrid {
    pub fn cell(&self, method: Method, k: usize) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.method == method && c.k == k)
    }

    fn check_complete(&self) -> Result<(), OccurError> {
        for &method in &self.methods {
            for k in 2..=self.k_max {
                if self.cell(method, k).is_none() {
                    return Err(OccurError::IncompleteGrid { method, k });
                }
            }
        }
        Ok(())
    }
}

/// Votes per cluster count, `votes[i]` belonging to K = i + 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteVector {
    pub votes: Vec<u64>,
}

impl VoteVector {
    pub fn get(&self, k: usize) -> u64 {
        self.votes[k - 2]
    }

    pub fn total(&self) -> u64 {
        self.votes.iter().sum()
    }

    /// Count with the most votes, smaller count on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.votes.iter().enumerate() {
            if v > self.votes[best] {
                best = i;
            }
        }
        best + 2
    }

    /// Vote mass every complete sweep produces: 3 indices per method times
    /// the sum of (k_max - v) over v = 1..k_max-1.
    pub fn expected_total(n_methods: usize, k_max: usize) -> u64 {
        let per_index: u64 = (1..k_max).map(|v| (k_max - v) as u64).sum();
        3 * n_methods as u64 * per_index
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringOutcome {
    pub k_opt: usize,
    pub best_method: Method,
    pub best_partition: Partition,
    pub grid: EvaluationGrid,
    pub vote_vector: VoteVector,
}

fn method_partitions(
    x: &Array2<f64>,
    dm: &DistanceMatrix,
    method: Method,
    cfg: &OccurConfig,
) -> Result<Vec<Partition>, OccurError> {
    let ks = 2..=cfg.k_max;
    let parts = match method {
        Method::KMeans => ks
            .map(|k| kmeans(x, k, &KMeansConfig { seed: cfg.seed, max_iter: cfg.max_iter, tol: cfg.tol }))
            .collect::<Result<Vec<_>, _>>()?,
        Method::KMedoids => ks
            .map(|k| kmedoids_dm(dm, k, cfg.seed, cfg.max_iter))
            .collect::<Result<Vec<_>, _>>()?,
        Method::Ahc | Method::Dhc => {
            let dendro = if method == Method::Ahc { average_linkage(dm) } else { divisive(dm, cfg.k_max)? };
            ks.map(|k| {
                let labels = dendro.cut(k)?;
                let objective = crate::clustering::hierarchical_objective(&dendro, k);
                Ok(Partition { method, k, labels, centroids: None, medoids: None, objective })
            })
            .collect::<Result<Vec<_>, ClusterError>>()?
        }
    };
    Ok(parts)
}

/// Runs every method at every K in 2..=k_max and scores each partition.
pub fn sweep_grid(x: &Array2<f64>, cfg: &OccurConfig) -> Result<EvaluationGrid, OccurError> {
    let n = x.nrows();
    if cfg.k_max < 2 || cfg.k_max > n {
        return Err(OccurError::KMaxOutOfRange { k_max: cfg.k_max, n });
    }
    if cfg.methods.is_empty() {
        return Err(OccurError::NoMethods);
    }
    let dm = pairwise_distances(x);
    let per_method: Vec<Vec<Partition>> = cfg
        .methods
        .par_iter()
        .map(|&m| method_partitions(x, &dm, m, cfg))
        .collect::<Result<_, _>>()?;
    let cells = per_method
        .into_par_iter()
        .flatten()
        .map(|partition| {
            let scores = score_all(&partition, &dm, cfg.n_neighbors).map_err(|source| OccurError::Validity {
                method: partition.method,
                k: partition.k,
                source,
            })?;
            Ok(GridCell { method: partition.method, k: partition.k, scores, partition })
        })
        .collect::<Result<Vec<_>, OccurError>>()?;
    Ok(EvaluationGrid { k_max: cfg.k_max, methods: cfg.methods.clone(), cells })
}

/// Index of the best remaining entry; `better(a, b)` means a beats b, ties
/// keep the earlier (smaller K) entry.
fn pick(pool: &[(usize, f64)], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, &(_, v)) in pool.iter().enumerate().skip(1) {
        if better(v, pool[best].1) {
            best = i;
        }
    }
    best
}

/// Tallies the ranked vote over a complete grid.
pub fn vote(grid: &EvaluationGrid) -> Result<VoteVector, OccurError> {
    grid.check_complete()?;
    let k_max = grid.k_max;
    let mut votes = vec![0u64; k_max - 1];
    let lower = |a: f64, b: f64| a < b;
    let higher = |a: f64, b: f64| a > b;
    for &method in &grid.methods {
        let column = |f: fn(&ValidityScores) -> f64| -> Vec<(usize, f64)> {
            (2..=k_max).map(|k| (k, f(&grid.cell(method, k).unwrap().scores))).collect()
        };
        let mut pools = [column(|s| s.conn), column(|s| s.silh), column(|s| s.dunn)];
        for round in 1..k_max {
            let weight = (k_max - round) as u64;
            for (metric, pool) in pools.iter_mut().enumerate() {
                let idx = if metric == 0 { pick(pool, lower) } else { pick(pool, higher) };
                let (k, _) = pool.remove(idx);
                votes[k - 2] += weight;
            }
        }
    }
    Ok(VoteVector { votes })
}

/// Chooses the method at `k` with the lowest summed rank over the three
/// indices; rank ties and sum ties follow the method order.
pub fn best_method_at(grid: &EvaluationGrid, k: usize) -> Result<Method, OccurError> {
    let cells: Vec<&GridCell> = grid
        .methods
        .iter()
        .map(|&m| grid.cell(m, k).ok_or(OccurError::IncompleteGrid { method: m, k }))
        .collect::<Result<_, _>>()?;
    let mut rank_sum = vec![0usize; cells.len()];
    let metrics: [(fn(&ValidityScores) -> f64, bool); 3] =
        [(|s| s.conn, false), (|s| s.silh, true), (|s| s.dunn, true)];
    for (value, higher_is_better) in metrics {
        let mut order: Vec<usize> = (0..cells.len()).collect();
        order.sort_by(|&a, &b| {
            let (va, vb) = (value(&cells[a].scores), value(&cells[b].scores));
            let o = if higher_is_better { vb.total_cmp(&va) } else { va.total_cmp(&vb) };
            o.then(cells[a].method.cmp(&cells[b].method))
        });
        for (rank, &i) in order.iter().enumerate() {
            rank_sum[i] += rank + 1;
        }
    }
    let best = (0..cells.len())
        .min_by(|&a, &b| rank_sum[a].cmp(&rank_sum[b]).then(cells[a].method.cmp(&cells[b].method)))
        .expect("non-empty grid");
    Ok(cells[best].method)
}

pub fn run_occur(x: &Array2<f64>, cfg: &OccurConfig) -> Result<ClusteringOutcome, OccurError> {
    let grid = sweep_grid(x, cfg)?;
    let vote_vector = vote(&grid)?;
    let k_opt = vote_vector.argmax();
    let best_method = best_method_at(&grid, k_opt)?;
    let best_partition = grid.cell(best_method, k_opt).expect("complete grid").partition.clone();
    Ok(ClusteringOutcome { k_opt, best_method, best_partition, grid, vote_vector })
}

/// Summary document written as `occur-report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccurReport {
    pub k_max: usize,
    pub k_opt: usize,
    pub best_method: Method,
    /// method -> list of {k, conn, silh, dunn}
    pub grid: BTreeMap<String, Vec<GridScoreRow>>,
    /// "K" -> votes
    pub votes: BTreeMap<usize, u64>,
    pub labels: Vec<DayLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScoreRow {
    pub k: usize,
    pub conn: f64,
    pub silh: f64,
    pub dunn: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayLabel {
    pub date: chrono::NaiveDate,
    pub cluster: usize,
}

impl OccurReport {
    pub fn new(outcome: &ClusteringOutcome, dates: &[chrono::NaiveDate]) -> Self {
        let mut grid: BTreeMap<String, Vec<GridScoreRow>> = BTreeMap::new();
        for c in &outcome.grid.cells {
            grid.entry(c.method.to_string()).or_default().push(GridScoreRow {
                k: c.k,
                conn: c.scores.conn,
                silh: c.scores.silh,
                dunn: c.scores.dunn,
            });
        }
        let votes = outcome.vote_vector.votes.iter().enumerate().map(|(i, v)| (i + 2, *v)).collect();
        let labels = dates
            .iter()
            .zip(&outcome.best_partition.labels)
            .map(|(d, l)| DayLabel { date: *d, cluster: *l })
            .collect();
        Self { k_max: outcome.grid.k_max, k_opt: outcome.k_opt, best_method: outcome.best_method, grid, votes, labels }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(conn: f64, silh: f64, dunn: f64) -> ValidityScores {
        ValidityScores { conn, silh, dunn }
    }

    fn dummy_partition(method: Method, k: usize) -> Partition {
        Partition { method, k, labels: (0..k).collect(), centroids: None, medoids: None, objective: 0.0 }
    }

    fn grid_from(k_max: usize, methods: &[Method], f: impl Fn(Method, usize) -> ValidityScores) -> EvaluationGrid {
        let mut cells = Vec::new();
        for &m in methods {
            for k in 2..=k_max {
                cells.push(GridCell { method: m, k, scores: f(m, k), partition: dummy_partition(m, k) });
            }
        }
        EvaluationGrid { k_max, methods: methods.to_vec(), cells }
    }

    #[test]
    fn unanimous_grid_votes() {
        let g = grid_from(4, &Method::ALL, |_, k| {
            if k == 3 {
                scores(0.0, 0.9, 3.0)
            } else {
                scores(k as f64, 0.1 * k as f64, 1.0 / k as f64)
            }
        });
        let v = vote(&g).unwrap();
        // 4 methods x 3 metrics x (k_max - 1) first-round votes
        assert_eq!(v.get(3), 36);
        assert_eq!(v.argmax(), 3);
        assert_eq!(v.total(), VoteVector::expected_total(4, 4));
    }

    #[test]
    fn disagreeing_metrics_two_methods() {
        // K_max = 3: pools {2, 3}. conn favours 2, silh favours 3, dunn favours 2.
        // Round 1 weight 1 (= 3 - 1... ) -> see hand simulation below.
        let methods = [Method::KMeans, Method::Ahc];
        let g = grid_from(3, &methods, |_, k| if k == 2 { scores(1.0, 0.2, 2.0) } else { scores(2.0, 0.5, 1.0) });
        // per method: round 1 (weight 2): conn->2, silh->3, dunn->2; round 2 (weight 1): conn->3, silh->2, dunn->3
        // K=2: 2+1+2 = 5 per method; K=3: 1+2+1 = 4 per method
        let v = vote(&g).unwrap();
        assert_eq!(v.votes, vec![10, 8]);
        assert_eq!(v.total(), VoteVector::expected_total(2, 3));
    }

    #[test]
    fn all_equal_prefers_smaller_k() {
        let g = grid_from(5, &Method::ALL, |_, _| scores(1.0, 0.5, 1.0));
        let v = vote(&g).unwrap();
        assert_eq!(v.votes, vec![48, 36, 24, 12]);
        assert_eq!(v.argmax(), 2);
    }

    #[test]
    fn incomplete_grid_rejected() {
        let mut g = grid_from(4, &Method::ALL, |_, _| scores(1.0, 0.5, 1.0));
        g.cells.retain(|c| !(c.method == Method::Dhc && c.k == 3));
        assert_eq!(vote(&g), Err(OccurError::IncompleteGrid { method: Method::Dhc, k: 3 }));
    }

    #[test]
    fn rank_sum_best_method() {
        let g = grid_from(3, &Method::ALL, |m, _| match m {
            Method::KMeans => scores(3.0, 0.5, 1.0),
            Method::KMedoids => scores(2.0, 0.6, 1.0),
            Method::Ahc => scores(1.0, 0.7, 2.0),
            Method::Dhc => scores(1.0, 0.7, 2.0),
        });
        assert_eq!(best_method_at(&g, 2).unwrap(), Method::Ahc);
    }

    #[test]
    fn k_max_bounds() {
        let x = Array2::from_shape_fn((5, 2), |(i, j)| (i * 3 + j) as f64);
        let cfg = OccurConfig { k_max: 1, n_neighbors: 2, ..Default::default() };
        assert_eq!(sweep_grid(&x, &cfg).unwrap_err(), OccurError::KMaxOutOfRange { k_max: 1, n: 5 });
        let cfg = OccurConfig { k_max: 6, n_neighbors: 2, ..Default::default() };
        assert!(sweep_grid(&x, &cfg).is_err());
    }
}
