//! Regression trees, gradient boosting and random forests.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` tries all.
    pub mtry: Option<usize>,
}

struct Builder<'a> {
    x: &'a Array2<f64>,
    y: &'a [f64],
    params: TreeParams,
    nodes: Vec<Node>,
    rng: Option<ChaCha8Rng>,
    go_left: Vec<bool>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    /// `sorted[f]` lists this node's sample positions ordered by feature `f`.
    fn build(&mut self, sorted: Vec<Vec<u32>>, depth: usize) -> usize {
        let members = &sorted[0];
        let n = members.len();
        let sum: f64 = members.iter().map(|&i| self.y[i as usize]).sum();
        let mean = sum / n as f64;
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: mean });
        if depth >= self.params.max_depth || n < 2 * self.params.min_leaf {
            return id;
        }
        let d = self.x.ncols();
        let features: Vec<usize> = match (self.params.mtry, self.rng.as_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut f = sample(rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        };
        let Some(best) = self.best_split(&sorted, &features, sum) else { return id };
        if best.gain <= 1e-12 * (1.0 + sum * sum / n as f64) {
            return id;
        }
        for &i in members {
            self.go_left[i as usize] = self.x[[i as usize, best.feature]] <= best.threshold;
        }
        let mut left = Vec::with_capacity(sorted.len());
        let mut right = Vec::with_capacity(sorted.len());
        for list in sorted {
            let (l, r): (Vec<u32>, Vec<u32>) = list.into_iter().partition(|&i| self.go_left[i as usize]);
            left.push(l);
            right.push(r);
        }
        let l = self.build(left, depth + 1);
        let r = self.build(right, depth + 1);
        self.nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left: l, right: r };
        id
    }

    fn best_split(&self, sorted: &[Vec<u32>], features: &[usize], sum: f64) -> Option<BestSplit> {
        let n = sorted[0].len();
        let min_leaf = self.params.min_leaf.max(1);
        let base = sum * sum / n as f64;
        let mut best: Option<BestSplit> = None;
        for &f in features {
            let list = &sorted[f];
            let mut left_sum = 0.0;
            for pos in 0..n - 1 {
                let i = list[pos] as usize;
                left_sum += self.y[i];
                let nl = pos + 1;
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let v = self.x[[i, f]];
                let next = self.x[[list[pos + 1] as usize, f]];
                if next <= v {
                    continue;
                }
                let right_sum = sum - left_sum;
                let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64 - base;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = 0.5 * (v + next);
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some(BestSplit { feature: f, threshold, gain });
                }
            }
        }
        best
    }
}

/// Fits a tree on the rows `rows` of `x` (rows may repeat).
pub fn fit_tree(x: &Array2<f64>, y: &[f64], rows: &[usize], params: TreeParams, seed: Option<u64>) -> RegressionTree {
    let sub = x.select(ndarray::Axis(0), rows);
    let ys: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
    fit_tree_full(&sub, &ys, params, seed)
}

/// Row indices ordered by each feature in turn.
pub fn presort(x: &Array2<f64>) -> Vec<Vec<u32>> {
    let n = x.nrows();
    (0..x.ncols())
        .map(|f| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| x[[a as usize, f]].total_cmp(&x[[b as usize, f]]).then(a.cmp(&b)));
            idx
        })
        .collect()
}

/// Fits a tree on every row of `x`.
pub fn fit_tree_full(x: &Array2<f64>, y: &[f64], params: TreeParams, seed: Option<u64>) -> RegressionTree {
    fit_tree_presorted(x, y, presort(x), params, seed)
}

fn fit_tree_presorted(
    x: &Array2<f64>,
    y: &[f64],
    sorted: Vec<Vec<u32>>,
    params: TreeParams,
    seed: Option<u64>,
) -> RegressionTree {
    let n = x.nrows();
    let mut b = Builder {
        x,
        y,
        params,
        nodes: Vec::new(),
        rng: seed.map(ChaCha8Rng::seed_from_u64),
        go_left: vec![false; n],
    };
    if x.ncols() == 0 || n == 0 {
        let mean = if n == 0 { 0.0 } else { y.iter().sum::<f64>() / n as f64 };
        return RegressionTree { nodes: vec![Node::Leaf { value: mean }] };
    }
    b.build(sorted, 0);
    RegressionTree { nodes: b.nodes }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub depth: usize,
    pub shrinkage: f64,
    pub rounds: usize,
    pub min_leaf: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gbm {
    pub init: f64,
    pub shrinkage: f64,
    pub trees: Vec<RegressionTree>,
}

impl Gbm {
    pub fn fit(x: &Array2<f64>, y: &[f64], p: GbmParams) -> Self {
        let n = y.len();
        let init = y.iter().sum::<f64>() / n as f64;
        let mut pred = vec![init; n];
        let mut trees = Vec::with_capacity(p.rounds);
        let tp = TreeParams { max_depth: p.depth, min_leaf: p.min_leaf, mtry: None };
        let sorted = presort(x);
        let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
        for _ in 0..p.rounds {
            let resid: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
            let t = fit_tree_presorted(x, &resid, sorted.clone(), tp, None);
            for (pr, r) in pred.iter_mut().zip(&rows) {
                *pr += p.shrinkage * t.predict(r);
            }
            trees.push(t);
        }
        Self { init, shrinkage: p.shrinkage, trees }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.init + self.shrinkage * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    pub min_leaf: usize,
    /// Features per split; `None` uses ⌈d/3⌉.
    pub mtry: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<RegressionTree>,
}

impl Forest {
    pub fn fit(x: &Array2<f64>, y: &[f64], p: ForestParams, seed: u64) -> Self {
        let (n, d) = x.dim();
        let mtry = p.mtry.unwrap_or(d.div_ceil(3)).clamp(1, d.max(1));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tp = TreeParams { max_depth: usize::MAX, min_leaf: p.min_leaf, mtry: Some(mtry) };
        let trees = (0..p.trees)
            .map(|_| {
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let tree_seed = rng.random::<u64>();
                fit_tree(x, y, &rows, tp, Some(tree_seed))
            })
            .collect();
        Self { trees }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}
