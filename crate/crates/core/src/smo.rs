//! Kernels and a sequential minimal optimization solver for the box- and
//! equality-constrained quadratic programs behind support vector
//! classification and regression.
//!
//! The solver minimizes `½ αᵀQα + pᵀα` subject to `yᵀα = 0` and
//! `0 ≤ α_i ≤ C_i`, with `Q_ij = y_i y_j K(i, j)`. Pairs are chosen by the
//! maximal-violating first index and a second-order gain for the second.

use serde::{Deserialize, Serialize};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    /// `(gamma · x·x' + coef0)^degree`
    Poly { degree: u32, gamma: f64, coef0: f64 },
    /// `exp(-gamma · ‖x − x'‖²)`
    Rbf { gamma: f64 },
    /// `exp(-‖x − x'‖ / (2 rho²))`, unsquared norm.
    Exponential { rho: f64 },
    /// `exp(-‖x − x'‖² / (2 rho²))`
    Gaussian { rho: f64 },
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Poly { degree, gamma, coef0 } => (gamma * dot(a, b) + coef0).powi(degree as i32),
            Kernel::Rbf { gamma } => (-gamma * sq_dist(a, b)).exp(),
            Kernel::Exponential { rho } => (-sq_dist(a, b).sqrt() / (2.0 * rho * rho)).exp(),
            Kernel::Gaussian { rho } => (-sq_dist(a, b) / (2.0 * rho * rho)).exp(),
        }
    }

    /// Symmetric Gram matrix, row-major.
    pub fn gram(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        let n = rows.len();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.eval(&rows[i], &rows[j]);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        k
    }
}

/// A dual problem over `len()` variables whose kernel rows repeat every
/// `n` variables (`n == len()` for classification, `2n` variables for
/// epsilon regression).
pub struct QpProblem<'a> {
    /// n × n Gram matrix.
    pub gram: &'a [f64],
    pub n: usize,
    pub y: Vec<f64>,
    pub p: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub alpha: Vec<f64>,
    /// Offset `rho`: decision values are `Σ y_i α_i K(x_i, x) − rho`.
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest remaining KKT violation (`m(α) − M(α)`).
    pub gap: f64,
}

impl QpProblem<'_> {
    fn len(&self) -> usize {
        self.y.len()
    }

    #[inline]
    fn k(&self, i: usize, j: usize) -> f64 {
        self.gram[(i % self.n) * self.n + (j % self.n)]
    }

    /// Fills `out[t] = y_i y_t K(i, t)` for the variables in `active`.
    fn q_row(&self, i: usize, active: &[usize], out: &mut [f64]) {
        let n = self.n;
        let row = &self.gram[(i % n) * n..(i % n + 1) * n];
        let yi = self.y[i];
        for &t in active {
            out[t] = yi * self.y[t] * row[t % n];
        }
    }

    /// Maximal violating pair among `active`: `(i, j, gap)`, where `i` or
    /// `j` is `usize::MAX` when no pair improves the objective.
    fn select(&self, alpha: &[f64], grad: &[f64], qd: &[f64], active: &[usize], qi: &mut [f64]) -> (usize, usize, f64) {
        let (y, c) = (&self.y, &self.upper);
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for &t in active {
            if y[t] > 0.0 {
                if alpha[t] < c[t] && -grad[t] >= gmax {
                    gmax = -grad[t];
                    i_sel = t;
                }
            } else if alpha[t] > 0.0 && grad[t] >= gmax {
                gmax = grad[t];
                i_sel = t;
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut obj_min = f64::INFINITY;
        if i_sel != usize::MAX {
            let i = i_sel;
            self.q_row(i, active, qi);
            for &t in active {
                if y[t] > 0.0 {
                    if alpha[t] > 0.0 {
                        let diff = gmax + grad[t];
                        gmax2 = gmax2.max(grad[t]);
                        if diff > 0.0 {
                            let quad = qd[i] + qd[t] - 2.0 * y[i] * qi[t];
                            let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                            if obj <= obj_min {
                                obj_min = obj;
                                j_sel = t;
                            }
                        }
                    }
                } else if alpha[t] < c[t] {
                    let diff = gmax - grad[t];
                    gmax2 = gmax2.max(-grad[t]);
                    if diff > 0.0 {
                        let quad = qd[i] + qd[t] + 2.0 * y[i] * qi[t];
                        let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                        if obj <= obj_min {
                            obj_min = obj;
                            j_sel = t;
                        }
                    }
                }
            }
        }
        (i_sel, j_sel, gmax + gmax2)
    }

    /// Recomputes the gradient of variables outside the active set.
    fn reconstruct_gradient(&self, alpha: &[f64], grad: &mut [f64], in_active: &[bool]) {
        let support: Vec<usize> = (0..self.len()).filter(|&j| alpha[j] > 0.0).collect();
        for t in (0..self.len()).filter(|&t| !in_active[t]) {
            grad[t] = self.p[t] + support.iter().map(|&j| self.y[t] * self.y[j] * self.k(t, j) * alpha[j]).sum::<f64>();
        }
    }

    /// Drops bounded variables that cannot re-enter the working set soon.
    /// The first time the gap falls below `10 eps`, every variable is
    /// reactivated once with a fresh gradient.
    fn shrink(&self, alpha: &[f64], grad: &mut [f64], eps: f64, unshrunk: &mut bool, active: &mut Vec<usize>, in_active: &mut [bool]) {
        let (y, c) = (&self.y, &self.upper);
        let (mut g1, mut g2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &t in active.iter() {
            let (up, low) = (alpha[t] < c[t], alpha[t] > 0.0);
            if y[t] > 0.0 {
                if up {
                    g1 = g1.max(-grad[t]);
                }
                if low {
                    g2 = g2.max(grad[t]);
                }
            } else {
                if up {
                    g2 = g2.max(-grad[t]);
                }
                if low {
                    g1 = g1.max(grad[t]);
                }
            }
        }
        if !*unshrunk && g1 + g2 <= 10.0 * eps {
            *unshrunk = true;
            self.reconstruct_gradient(alpha, grad, in_active);
            *active = (0..self.len()).collect();
            in_active.iter_mut().for_each(|a| *a = true);
        }
        active.retain(|&t| {
            let drop = if alpha[t] >= c[t] {
                -grad[t] > if y[t] > 0.0 { g1 } else { g2 }
            } else if alpha[t] <= 0.0 {
                grad[t] > if y[t] > 0.0 { g2 } else { g1 }
            } else {
                false
            };
            if drop {
                in_active[t] = false;
            }
            !drop
        });
    }

    /// Solves from α = 0, which must be feasible (`yᵀ0 = 0`).
    pub fn solve(&self, eps: f64, max_iter: usize) -> QpSolution {
        let l = self.len();
        let y = &self.y;
        let c = &self.upper;
        let mut alpha = vec![0.0; l];
        let mut grad = self.p.clone();
        let qd: Vec<f64> = (0..l).map(|i| self.k(i, i)).collect();
        let mut qi = vec![0.0; l];
        let mut qj = vec![0.0; l];
        let mut active: Vec<usize> = (0..l).collect();
        let mut in_active = vec![true; l];
        let mut unshrunk = false;
        let mut counter = l.min(1000) + 1;

        let mut iter = 0;
        let mut gap;
        let mut converged = false;
        loop {
            counter -= 1;
            if counter == 0 {
                counter = l.min(1000);
                self.shrink(&alpha, &mut grad, eps, &mut unshrunk, &mut active, &mut in_active);
            }
            let (mut i, mut j, mut g) = self.select(&alpha, &grad, &qd, &active, &mut qi);
            if i == usize::MAX || j == usize::MAX || g < eps {
                // Optimal on the active set; confirm on all variables.
                if active.len() < l {
                    self.reconstruct_gradient(&alpha, &mut grad, &in_active);
                    active = (0..l).collect();
                    in_active.iter_mut().for_each(|a| *a = true);
                    (i, j, g) = self.select(&alpha, &grad, &qd, &active, &mut qi);
                    counter = 1;
                }
                if i == usize::MAX || j == usize::MAX || g < eps {
                    gap = g;
                    converged = true;
                    break;
                }
            }
            gap = g;
            if iter >= max_iter {
                break;
            }
            iter += 1;
            self.q_row(j, &active, &mut qj);
            let (old_i, old_j) = (alpha[i], alpha[j]);
            let (ci, cj) = (c[i], c[j]);
            if y[i] != y[j] {
                let mut quad = qd[i] + qd[j] + 2.0 * qi[j];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > ci - cj {
                    if alpha[i] > ci {
                        alpha[i] = ci;
                        alpha[j] = ci - diff;
                    }
                } else if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = cj + diff;
                }
            } else {
                let mut quad = qd[i] + qd[j] - 2.0 * qi[j];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > ci {
                    if alpha[i] > ci {
                        alpha[i] = ci;
                        alpha[j] = sum - ci;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > cj {
                    if alpha[j] > cj {
                        alpha[j] = cj;
                        alpha[i] = sum - cj;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            for &t in &active {
                grad[t] += qi[t] * di + qj[t] * dj;
            }
        }
        if active.len() < l {
            self.reconstruct_gradient(&alpha, &mut grad, &in_active);
        }

        let rho = self.offset(&alpha, &grad);
        QpSolution { alpha, rho, iterations: iter, converged, gap }
    }

    fn offset(&self, alpha: &[f64], grad: &[f64]) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut n_free, mut sum_free) = (0usize, 0.0);
        for t in 0..self.len() {
            let yg = self.y[t] * grad[t];
            if alpha[t] >= self.upper[t] {
                if self.y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if alpha[t] <= 0.0 {
                if self.y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                sum_free += yg;
            }
        }
        if n_free > 0 {
            sum_free / n_free as f64
        } else if ub.is_finite() && lb.is_finite() {
            (ub + lb) / 2.0
        } else if ub.is_finite() {
            ub
        } else if lb.is_finite() {
            lb
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_at_zero_distance() {
        let a = [1.0, 2.0];
        assert_eq!(Kernel::Rbf { gamma: 3.0 }.eval(&a, &a), 1.0);
        assert_eq!(Kernel::Exponential { rho: 0.5 }.eval(&a, &a), 1.0);
        assert_eq!(Kernel::Gaussian { rho: 0.5 }.eval(&a, &a), 1.0);
        assert_eq!(Kernel::Linear.eval(&a, &a), 5.0);
        assert_eq!(Kernel::Poly { degree: 2, gamma: 1.0, coef0: 1.0 }.eval(&a, &a), 36.0);
    }

    #[test]
    fn exponential_uses_unsquared_norm() {
        let k = Kernel::Exponential { rho: 1.0 }.eval(&[0.0, 0.0], &[3.0, 4.0]);
        assert!((k - (-2.5f64).exp()).abs() < 1e-15);
        let g = Kernel::Gaussian { rho: 1.0 }.eval(&[0.0, 0.0], &[3.0, 4.0]);
        assert!((g - (-12.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn two_point_classification() {
        let rows = vec![vec![-1.0], vec![1.0]];
        let gram = Kernel::Linear.gram(&rows);
        let qp = QpProblem { gram: &gram, n: 2, y: vec![-1.0, 1.0], p: vec![-1.0; 2], upper: vec![10.0; 2] };
        let s = qp.solve(1e-9, 1000);
        assert!(s.converged);
        // hard margin: w = 1, alpha = 1/2 each
        assert!((s.alpha[0] - 0.5).abs() < 1e-9 && (s.alpha[1] - 0.5).abs() < 1e-9);
        assert!(s.rho.abs() < 1e-9);
    }
}
