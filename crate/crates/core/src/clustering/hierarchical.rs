//! Average-linkage agglomerative and divisive hierarchical clustering.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{canonicalize, check_k, pairwise_distances, ClusterError, DistanceMatrix, Method, Partition};

/// Largest cluster split by enumerating every bipartition.
pub const EXHAUSTIVE_SPLIT_MAX: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Agglomerative,
    Divisive,
}

/// One merge (agglomerative) or split (divisive): the two member sets and
/// the average inter-set distance between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DendrogramStep {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n: usize,
    pub direction: Direction,
    pub steps: Vec<DendrogramStep>,
}

impl Dendrogram {
    /// Largest cluster count this dendrogram can be cut at.
    pub fn max_clusters(&self) -> usize {
        match self.direction {
            Direction::Agglomerative => self.n,
            Direction::Divisive => self.steps.len() + 1,
        }
    }

    /// Canonical labels of the `k`-cluster level.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>, ClusterError> {
        let n = self.n;
        check_k(k, n)?;
        let min_k = match self.direction {
            Direction::Agglomerative => n - self.steps.len(),
            Direction::Divisive => 1,
        };
        if k < min_k || k > self.max_clusters() {
            return Err(ClusterError::KOutOfRange { k, n: self.max_clusters() });
        }
        let mut ids: Vec<usize> = match self.direction {
            Direction::Agglomerative => (0..n).collect(),
            Direction::Divisive => vec![0; n],
        };
        match self.direction {
            Direction::Agglomerative => {
                for step in &self.steps[..n - k] {
                    let target = ids[step.left[0]];
                    for &r in &step.right {
                        ids[r] = target;
                    }
                    for &l in &step.left {
                        ids[l] = target;
                    }
                }
            }
            Direction::Divisive => {
                for (s, step) in self.steps[..k - 1].iter().enumerate() {
                    for &r in &step.right {
                        ids[r] = s + 1;
                    }
                }
            }
        }
        Ok(canonicalize(&ids, n).0)
    }
}

/// Full average-linkage merge sequence. Ties go to the lexicographically
/// smallest pair of clusters, each cluster named by its smallest member.
pub fn average_linkage(dm: &DistanceMatrix) -> Dendrogram {
    let n = dm.n();
    let mut d: Vec<f64> = (0..n * n).map(|idx| dm.get(idx / n, idx % n)).collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut steps = Vec::with_capacity(n.saturating_sub(1));
    while active.len() > 1 {
        let mut best = (usize::MAX, usize::MAX);
        let mut best_d = f64::INFINITY;
        for (ai, &i) in active.iter().enumerate() {
            for &j in &active[ai + 1..] {
                let v = d[i * n + j];
                if v < best_d {
                    best_d = v;
                    best = (i, j);
                }
            }
        }
        let (i, j) = best;
        let (ni, nj) = (members[i].len() as f64, members[j].len() as f64);
        for &o in &active {
            if o == i || o == j {
                continue;
            }
            let v = (ni * d[i * n + o] + nj * d[j * n + o]) / (ni + nj);
            d[i * n + o] = v;
            d[o * n + i] = v;
        }
        let right = std::mem::take(&mut members[j]);
        steps.push(DendrogramStep { left: members[i].clone(), right: right.clone(), height: best_d });
        members[i].extend(right);
        members[i].sort_unstable();
        active.retain(|&a| a != j);
    }
    Dendrogram { n, direction: Direction::Agglomerative, steps }
}

pub fn ahc_average(x: &Array2<f64>, k: usize) -> Result<(Partition, Dendrogram), ClusterError> {
    check_k(k, x.nrows())?;
    let dendro = average_linkage(&pairwise_distances(x));
    let labels = dendro.cut(k)?;
    let objective = hierarchical_objective(&dendro, k);
    Ok((Partition { method: Method::Ahc, k, labels, centroids: None, medoids: None, objective }, dendro))
}

/// Height of the step that produced the `k`-cluster level (0 for the leaves).
pub(crate) fn hierarchical_objective(d: &Dendrogram, k: usize) -> f64 {
    match d.direction {
        Direction::Agglomerative if k < d.n => d.steps[d.n - k - 1].height,
        Direction::Divisive if k > 1 => d.steps[k - 2].height,
        _ => 0.0,
    }
}

/// Average distance between the two sides of a bipartition.
pub fn bipartition_score(dm: &DistanceMatrix, left: &[usize], right: &[usize]) -> f64 {
    let s: f64 = left.iter().flat_map(|&a| right.iter().map(move |&b| (a, b))).map(|(a, b)| dm.get(a, b)).sum();
    s / (left.len() * right.len()) as f64
}

fn sides(members: &[usize], in_right: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let mut l = Vec::new();
    let mut r = Vec::new();
    for (&m, &b) in members.iter().zip(in_right) {
        if b {
            r.push(m)
        } else {
            l.push(m)
        }
    }
    (l, r)
}

/// Bipartition maximizing the average between-side distance, by Gray-code
/// enumeration of all 2^(m-1)-1 splits (the first member stays left).
pub fn best_bipartition_exhaustive(dm: &DistanceMatrix, members: &[usize]) -> (Vec<usize>, Vec<usize>, f64) {
    let m = members.len();
    assert!(m >= 2, "cannot split fewer than two objects");
    let total: Vec<f64> = members.iter().map(|&a| members.iter().map(|&b| dm.get(a, b)).sum()).collect();
    let mut to_right = vec![0.0; m];
    let mut in_right = vec![false; m];
    let mut cross = 0.0;
    let mut n_right = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    let mut best = in_right.clone();
    let limit: u64 = 1 << (m - 1);
    for g in 1..limit {
        // Gray code step: flip bit of the lowest set bit of g, on element bit+1
        let e = g.trailing_zeros() as usize + 1;
        if in_right[e] {
            cross += to_right[e] - (total[e] - to_right[e]);
            n_right -= 1;
        } else {
            cross += (total[e] - to_right[e]) - to_right[e];
            n_right += 1;
        }
        in_right[e] = !in_right[e];
        let sign = if in_right[e] { 1.0 } else { -1.0 };
        for t in 0..m {
            to_right[t] += sign * dm.get(members[t], members[e]);
        }
        if n_right == 0 {
            continue;
        }
        let score = cross / ((m - n_right) * n_right) as f64;
        if score > best_score {
            best_score = score;
            best.copy_from_slice(&in_right);
        }
    }
    let (l, r) = sides(members, &best);
    let score = bipartition_score(dm, &l, &r);
    (l, r, score)
}

struct SplitState<'a> {
    dm: &'a DistanceMatrix,
    members: &'a [usize],
    total: Vec<f64>,
    to_right: Vec<f64>,
    in_right: Vec<bool>,
    cross: f64,
    n_right: usize,
}

impl<'a> SplitState<'a> {
    fn new(dm: &'a DistanceMatrix, members: &'a [usize], total: &[f64], right: &[usize]) -> Self {
        let m = members.len();
        let mut s = SplitState {
            dm,
            members,
            total: total.to_vec(),
            to_right: vec![0.0; m],
            in_right: vec![false; m],
            cross: 0.0,
            n_right: 0,
        };
        for &r in right {
            s.flip(r);
        }
        s
    }

    fn score_after_flip(&self, e: usize) -> Option<f64> {
        let m = self.members.len();
        let (cross, n_right) = if self.in_right[e] {
            (self.cross + self.to_right[e] - (self.total[e] - self.to_right[e]), self.n_right - 1)
        } else {
            (self.cross + (self.total[e] - self.to_right[e]) - self.to_right[e], self.n_right + 1)
        };
        (n_right > 0 && n_right < m).then(|| cross / ((m - n_right) * n_right) as f64)
    }

    fn flip(&mut self, e: usize) {
        if self.in_right[e] {
            self.cross += self.to_right[e] - (self.total[e] - self.to_right[e]);
            self.n_right -= 1;
        } else {
            self.cross += (self.total[e] - self.to_right[e]) - self.to_right[e];
            self.n_right += 1;
        }
        self.in_right[e] = !self.in_right[e];
        let sign = if self.in_right[e] { 1.0 } else { -1.0 };
        for t in 0..self.members.len() {
            self.to_right[t] += sign * self.dm.get(self.members[t], self.members[e]);
        }
    }

    fn score(&self) -> f64 {
        let m = self.members.len();
        self.cross / ((m - self.n_right) * self.n_right) as f64
    }

    /// Best-improvement single-object moves until no move helps.
    fn climb(&mut self) {
        loop {
            let current = self.score();
            let mut best = None;
            let mut best_score = current + 1e-12 * current.abs().max(1.0);
            for e in 0..self.members.len() {
                if let Some(s) = self.score_after_flip(e) {
                    if s > best_score {
                        best_score = s;
                        best = Some(e);
                    }
                }
            }
            match best {
                Some(e) => self.flip(e),
                None => return,
            }
        }
    }
}

/// Splinter-growing start (highest average dissimilarity object seeds the
/// splinter, objects closer to it on average follow), every singleton start
/// and a farthest-pair start, each refined by single-object moves; the best
/// bipartition found is returned.
pub fn best_bipartition_heuristic(dm: &DistanceMatrix, members: &[usize]) -> (Vec<usize>, Vec<usize>, f64) {
    let m = members.len();
    assert!(m >= 2, "cannot split fewer than two objects");
    let total: Vec<f64> = members.iter().map(|&a| members.iter().map(|&b| dm.get(a, b)).sum()).collect();

    let mut starts: Vec<Vec<usize>> = Vec::with_capacity(m + 2);
    starts.push(splinter_start(dm, members, &total));
    let mut far = (0, 1);
    for a in 0..m {
        for b in (a + 1)..m {
            if dm.get(members[a], members[b]) > dm.get(members[far.0], members[far.1]) {
                far = (a, b);
            }
        }
    }
    let pair_side: Vec<usize> = (0..m)
        .filter(|&t| dm.get(members[t], members[far.1]) < dm.get(members[t], members[far.0]))
        .collect();
    if !pair_side.is_empty() && pair_side.len() < m {
        starts.push(pair_side);
    }
    starts.extend((0..m).map(|t| vec![t]));

    let mut best_state: Option<Vec<bool>> = None;
    let mut best_score = f64::NEG_INFINITY;
    for right in &starts {
        let mut st = SplitState::new(dm, members, &total, right);
        st.climb();
        let s = st.score();
        if s > best_score {
            best_score = s;
            best_state = Some(st.in_right.clone());
        }
    }
    let mut in_right = best_state.expect("at least one start");
    // keep the first member on the left for a canonical orientation
    if in_right[0] {
        in_right.iter_mut().for_each(|b| *b = !*b);
    }
    let (l, r) = sides(members, &in_right);
    let score = bipartition_score(dm, &l, &r);
    (l, r, score)
}

fn splinter_start(dm: &DistanceMatrix, members: &[usize], total: &[f64]) -> Vec<usize> {
    let m = members.len();
    let seed = (0..m).fold(0, |b, t| if total[t] > total[b] { t } else { b });
    let mut in_right = vec![false; m];
    in_right[seed] = true;
    let mut n_right = 1;
    loop {
        if m - n_right <= 1 {
            break;
        }
        let mut best = None;
        let mut best_gain = 0.0;
        for t in 0..m {
            if in_right[t] {
                continue;
            }
            let (mut to_l, mut to_r) = (0.0, 0.0);
            for u in 0..m {
                let d = dm.get(members[t], members[u]);
                if in_right[u] {
                    to_r += d
                } else {
                    to_l += d
                }
            }
            let gain = to_l / (m - n_right - 1) as f64 - to_r / n_right as f64;
            if gain > best_gain {
                best_gain = gain;
                best = Some(t);
            }
        }
        match best {
            Some(t) => {
                in_right[t] = true;
                n_right += 1;
            }
            None => break,
        }
    }
    (0..m).filter(|&t| in_right[t]).collect()
}

fn diameter(dm: &DistanceMatrix, members: &[usize]) -> f64 {
    let mut d: f64 = 0.0;
    for (a, &i) in members.iter().enumerate() {
        for &j in &members[a + 1..] {
            d = d.max(dm.get(i, j));
        }
    }
    d
}

/// Top-down splits until `k_max` clusters: the cluster with the largest
/// diameter is split next (ties to the one with the smallest member).
pub fn divisive(dm: &DistanceMatrix, k_max: usize) -> Result<Dendrogram, ClusterError> {
    let n = dm.n();
    check_k(k_max, n)?;
    let mut clusters: Vec<Vec<usize>> = vec![(0..n).collect()];
    let mut steps = Vec::with_capacity(k_max - 1);
    while clusters.len() < k_max {
        let mut pick = None;
        let mut pick_d = -1.0;
        let mut pick_min = usize::MAX;
        for (c, mem) in clusters.iter().enumerate() {
            if mem.len() < 2 {
                continue;
            }
            let d = diameter(dm, mem);
            if d > pick_d || (d == pick_d && mem[0] < pick_min) {
                pick = Some(c);
                pick_d = d;
                pick_min = mem[0];
            }
        }
        let c = pick.expect("k_max <= n leaves a splittable cluster");
        let members = clusters.swap_remove(c);
        let (l, r, height) = if members.len() <= EXHAUSTIVE_SPLIT_MAX {
            best_bipartition_exhaustive(dm, &members)
        } else {
            best_bipartition_heuristic(dm, &members)
        };
        steps.push(DendrogramStep { left: l.clone(), right: r.clone(), height });
        clusters.push(l);
        clusters.push(r);
        clusters.sort_by_key(|m| m[0]);
    }
    Ok(Dendrogram { n, direction: Direction::Divisive, steps })
}

pub fn dhc(x: &Array2<f64>, k: usize) -> Result<(Partition, Dendrogram), ClusterError> {
    check_k(k, x.nrows())?;
    let dendro = divisive(&pairwise_distances(x), k)?;
    let labels = dendro.cut(k)?;
    let objective = hierarchical_objective(&dendro, k);
    Ok((Partition { method: Method::Dhc, k, labels, centroids: None, medoids: None, objective }, dendro))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn line() -> Array2<f64> {
        array![[0.0], [1.0], [10.0], [11.0]]
    }

    #[test]
    fn ahc_two_pairs() {
        let (p, d) = ahc_average(&line(), 2).unwrap();
        assert_eq!(p.labels, vec![0, 0, 1, 1]);
        assert_eq!(d.steps.len(), 3);
        // mean of 10, 11, 9, 10
        assert!((d.steps[2].height - 10.0).abs() < 1e-12);
        let (p1, _) = ahc_average(&line(), 1).unwrap();
        assert_eq!(p1.labels, vec![0; 4]);
    }

    #[test]
    fn ahc_final_merge_height_hand_evaluated() {
        // {0,1} and {10,11}: pairwise |0-10|, |0-11|, |1-10|, |1-11| -> 10, 11, 9, 10
        let heights: Vec<f64> = average_linkage(&pairwise_distances(&line())).steps.iter().map(|s| s.height).collect();
        assert_eq!(heights[..2], [1.0, 1.0]);
        assert!((heights[2] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn dhc_two_pairs_and_singletons() {
        let (p, d) = dhc(&line(), 2).unwrap();
        assert_eq!(p.labels, vec![0, 0, 1, 1]);
        assert!((d.steps[0].height - 10.0).abs() < 1e-12);
        let (p4, _) = dhc(&line(), 4).unwrap();
        assert_eq!(p4.sizes(), vec![1, 1, 1, 1]);
    }

    #[test]
    fn flip_bookkeeping_matches_direct_score() {
        let x = array![[0.0, 1.0], [2.0, 5.0], [7.0, 1.0], [3.0, 3.0], [9.0, 9.0], [4.0, 0.5]];
        let dm = pairwise_distances(&x);
        let members: Vec<usize> = (0..6).collect();
        let total: Vec<f64> = members.iter().map(|&a| members.iter().map(|&b| dm.get(a, b)).sum()).collect();
        let mut st = SplitState::new(&dm, &members, &total, &[1, 4]);
        for e in [2, 4, 0, 1, 2] {
            let predicted = st.score_after_flip(e);
            st.flip(e);
            let (l, r) = sides(&members, &st.in_right);
            assert!((st.score() - bipartition_score(&dm, &l, &r)).abs() < 1e-9);
            assert!((predicted.unwrap() - st.score()).abs() < 1e-9);
        }
    }

    #[test]
    fn divisive_cut_levels_nest() {
        let x = Array2::from_shape_fn((20, 2), |(i, j)| ((i * 31 + j * 17) % 23) as f64);
        let d = divisive(&pairwise_distances(&x), 6).unwrap();
        for k in 2..=6 {
            let fine = d.cut(k).unwrap();
            let coarse = d.cut(k - 1).unwrap();
            for a in 0..20 {
                for b in 0..20 {
                    if fine[a] == fine[b] {
                        assert_eq!(coarse[a], coarse[b]);
                    }
                }
            }
        }
        assert!(d.cut(7).is_err());
    }
}
