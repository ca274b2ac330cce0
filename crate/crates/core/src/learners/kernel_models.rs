//! Support vector regression, nearest neighbors and ridge regression.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::smo::{Kernel, QpProblem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Svr {
    pub kernel: Kernel,
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i − α*_i` per support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
    pub converged: bool,
}

impl Svr {
    /// Epsilon-insensitive regression on standardized rows.
    pub fn fit(rows: &[Vec<f64>], y: &[f64], kernel: Kernel, c: f64, epsilon: f64, max_iter: usize) -> Self {
        let n = rows.len();
        let gram = kernel.gram(rows);
        let mut sign = vec![1.0; n];
        sign.extend(std::iter::repeat_n(-1.0, n));
        let mut p: Vec<f64> = y.iter().map(|v| epsilon - v).collect();
        p.extend(y.iter().map(|v| epsilon + v));
        let qp = QpProblem { gram: &gram, n, y: sign, p, upper: vec![c; 2 * n] };
        let sol = qp.solve(1e-3, max_iter);
        if !sol.converged {
            log::warn!("svr stopped after {} iterations with gap {:.3e}", sol.iterations, sol.gap);
        }
        let mut out = Svr { kernel, support_vectors: Vec::new(), coef: Vec::new(), rho: sol.rho, converged: sol.converged };
        for i in 0..n {
            let c = sol.alpha[i] - sol.alpha[i + n];
            if c != 0.0 {
                out.support_vectors.push(rows[i].clone());
                out.coef.push(c);
            }
        }
        out
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.support_vectors.iter().zip(&self.coef).map(|(s, c)| c * self.kernel.eval(s, x)).sum::<f64>() - self.rho
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl Knn {
    /// Mean target of the `k` nearest stored rows; equal distances are
    /// broken by row order.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut d: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let k = self.k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
        }
        d[..k].iter().map(|&(_, i)| self.targets[i]).sum::<f64>() / k as f64
    }
}

/// Linear least squares with an L2 penalty on the weights; the intercept is
/// left unpenalized by centering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ridge {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl Ridge {
    pub fn fit(rows: &[Vec<f64>], y: &[f64], lambda: f64) -> Self {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.len());
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v / n as f64);
        }
        let x = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let mut a = x.transpose() * &x;
        for j in 0..d {
            a[(j, j)] += lambda;
        }
        let b = x.transpose() * yc;
        let w = match a.clone().cholesky() {
            Some(ch) => ch.solve(&b),
            None => a.lu().solve(&b).unwrap_or_else(|| DVector::zeros(d)),
        };
        let weights: Vec<f64> = w.iter().copied().collect();
        let intercept = y_mean - weights.iter().zip(&mean).map(|(w, m)| w * m).sum::<f64>();
        Self { weights, intercept }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ridge_recovers_line() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.5]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0]).collect();
        let m = Ridge::fit(&rows, &y, 1e-8);
        let rmse = (rows.iter().zip(&y).map(|(r, t)| (m.predict(r) - t).powi(2)).sum::<f64>() / 20.0).sqrt();
        assert!(rmse < 1e-6, "{rmse}");
    }

    #[test]
    fn one_nearest_neighbor_memorizes() {
        let m = Knn { k: 1, rows: vec![vec![0.0], vec![1.0], vec![3.0]], targets: vec![5.0, 6.0, 7.0] };
        assert_eq!(m.predict(&[1.0]), 6.0);
        assert_eq!(m.predict(&[2.0]), 6.0); // tie goes to the earlier row
    }

    #[test]
    fn svr_fits_linear_data_within_tube() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 15.0 - 1.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 0.8 * r[0] + 0.1).collect();
        let m = Svr::fit(&rows, &y, Kernel::Linear, 10.0, 0.01, 100_000);
        assert!(m.converged);
        for (r, t) in rows.iter().zip(&y) {
            assert!((m.predict(r) - t).abs() < 0.02);
        }
    }
}
