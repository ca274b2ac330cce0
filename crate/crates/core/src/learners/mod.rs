//! First-layer regressors and second-layer blenders behind one enum-dispatched
//! model type, so fitted models serialize as plain JSON.

mod ann;
mod kernel_models;
mod tree;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ann::{loss_and_gradient, Activation, Ann, AnnParams, AnnShape};
pub use kernel_models::{Knn, Ridge, Svr};
pub use tree::{fit_tree, fit_tree_full, presort, Forest, ForestParams, Gbm, GbmParams, Node, RegressionTree, TreeParams};

use crate::smo::Kernel;

/// Smallest training set a learner accepts.
pub const MIN_SAMPLES: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum LearnerError {
    #[error("degenerate input: {0} samples")]
    DegenerateInput(usize),
    #[error("non-finite value in row {0}")]
    NonFiniteFeature(usize),
    #[error("expected {expected} inputs, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvrKernel {
    Linear,
    Rbf,
    Poly2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LearnerSpec {
    Ann(AnnParams),
    Svr { kernel: SvrKernel, c: f64, epsilon: f64 },
    Gbm(GbmParams),
    Rf(ForestParams),
    Knn { k: usize },
    Ridge { lambda: f64 },
    /// Average of the inputs; with a single input it is the identity.
    Mean,
}

impl LearnerSpec {
    pub fn family(&self) -> &'static str {
        match self {
            LearnerSpec::Ann(_) => "ann",
            LearnerSpec::Svr { .. } => "svr",
            LearnerSpec::Gbm(_) => "gbm",
            LearnerSpec::Rf(_) => "rf",
            LearnerSpec::Knn { .. } => "knn",
            LearnerSpec::Ridge { .. } => "ridge",
            LearnerSpec::Mean => "mean",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerVariant {
    pub name: String,
    pub spec: LearnerSpec,
}

impl LearnerVariant {
    pub fn new(name: &str, spec: LearnerSpec) -> Self {
        Self { name: name.to_string(), spec }
    }
}

pub const ANN_EPOCHS: usize = 2000;

fn ann(hidden: usize, activation: Activation) -> LearnerSpec {
    LearnerSpec::Ann(AnnParams {
        hidden,
        activation,
        epochs: ANN_EPOCHS,
        learning_rate: 0.01,
        momentum: 0.9,
        weight_decay: 1e-4,
    })
}

fn svr(kernel: SvrKernel) -> LearnerSpec {
    LearnerSpec::Svr { kernel, c: 1.0, epsilon: 0.01 }
}

fn gbm(depth: usize, shrinkage: f64, rounds: usize) -> LearnerSpec {
    LearnerSpec::Gbm(GbmParams { depth, shrinkage, rounds, min_leaf: 5 })
}

/// The eleven first-layer variants: four networks, three support vector
/// regressors, three boosted ensembles and a random forest.
pub fn catalog() -> Vec<LearnerVariant> {
    vec![
        LearnerVariant::new("ann1", ann(5, Activation::Tanh)),
        LearnerVariant::new("ann2", ann(10, Activation::Tanh)),
        LearnerVariant::new("ann3", ann(20, Activation::Tanh)),
        LearnerVariant::new("ann4", ann(10, Activation::Logistic)),
        LearnerVariant::new("svr1", svr(SvrKernel::Linear)),
        LearnerVariant::new("svr2", svr(SvrKernel::Rbf)),
        LearnerVariant::new("svr3", svr(SvrKernel::Poly2)),
        LearnerVariant::new("gbm1", gbm(1, 0.1, 200)),
        LearnerVariant::new("gbm2", gbm(3, 0.1, 200)),
        LearnerVariant::new("gbm3", gbm(3, 0.05, 400)),
        LearnerVariant::new("rf", LearnerSpec::Rf(ForestParams { trees: 200, min_leaf: 5, mtry: None })),
    ]
}

/// Second-layer candidates compared by cross-validation.
pub fn blender_candidates() -> Vec<LearnerVariant> {
    vec![
        LearnerVariant::new("ridge", LearnerSpec::Ridge { lambda: 1.0 }),
        LearnerVariant::new("gbm", gbm(2, 0.1, 100)),
        LearnerVariant::new("rf", LearnerSpec::Rf(ForestParams { trees: 100, min_leaf: 5, mtry: None })),
        LearnerVariant::new("knn", LearnerSpec::Knn { k: 5 }),
    ]
}

/// Looks a variant up by name in the catalog and blender candidates; `mean`
/// names the averaging blender.
pub fn variant_by_name(name: &str) -> Option<LearnerVariant> {
    if name == "mean" {
        return Some(LearnerVariant::new("mean", LearnerSpec::Mean));
    }
    catalog().into_iter().chain(blender_candidates()).find(|v| v.name == name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Inner {
    Constant { value: f64 },
    Ann(Ann),
    Svr(Svr),
    Gbm(Gbm),
    Forest(Forest),
    Knn(Knn),
    Ridge(Ridge),
    Mean,
}

/// A fitted regressor with its input and target standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub input_dim: usize,
    /// Empty when inputs are used unscaled.
    pub x_mean: Vec<f64>,
    pub x_std: Vec<f64>,
    pub y_mean: f64,
    pub y_std: f64,
    pub model: Inner,
}

impl FittedModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64, LearnerError> {
        if x.len() != self.input_dim {
            return Err(LearnerError::DimensionMismatch { expected: self.input_dim, got: x.len() });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let scaled;
        let xs = if self.x_mean.is_empty() {
            x
        } else {
            scaled = x
                .iter()
                .zip(&self.x_mean)
                .zip(&self.x_std)
                .map(|((v, m), s)| (v - m) / s)
                .collect::<Vec<f64>>();
            &scaled
        };
        let raw = match &self.model {
            Inner::Constant { value } => return *value,
            Inner::Ann(m) => m.predict(xs),
            Inner::Svr(m) => m.predict(xs),
            Inner::Gbm(m) => m.predict(xs),
            Inner::Forest(m) => m.predict(xs),
            Inner::Knn(m) => m.predict(xs),
            Inner::Ridge(m) => m.predict(xs),
            Inner::Mean => xs.iter().sum::<f64>() / xs.len().max(1) as f64,
        };
        self.y_mean + self.y_std * raw
    }

    pub fn predict_rows(&self, x: &Array2<f64>) -> Result<Vec<f64>, LearnerError> {
        x.rows().into_iter().map(|r| self.predict(&r.to_vec())).collect()
    }
}

fn column_stats(x: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    let mut mean = Vec::with_capacity(x.ncols());
    let mut std = Vec::with_capacity(x.ncols());
    for col in x.columns() {
        let m = col.sum() / n;
        let s = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
        mean.push(m);
        std.push(if s > 1e-12 * (1.0 + m.abs()) { s } else { 1.0 });
    }
    (mean, std)
}

fn standardized(x: &Array2<f64>, mean: &[f64], std: &[f64]) -> Array2<f64> {
    Array2::from_shape_fn(x.dim(), |(i, j)| (x[[i, j]] - mean[j]) / std[j])
}

fn rows_of(x: &Array2<f64>) -> Vec<Vec<f64>> {
    x.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Fits `spec` on `(x, y)`. A constant target yields a constant model.
pub fn fit(spec: &LearnerSpec, x: &Array2<f64>, y: &[f64], seed: u64) -> Result<FittedModel, LearnerError> {
    let (n, d) = x.dim();
    if n < MIN_SAMPLES || y.len() != n {
        return Err(LearnerError::DegenerateInput(n.min(y.len())));
    }
    if d == 0 {
        return Err(LearnerError::DimensionMismatch { expected: 1, got: 0 });
    }
    for (i, row) in x.rows().into_iter().enumerate() {
        if row.iter().any(|v| !v.is_finite()) || !y[i].is_finite() {
            return Err(LearnerError::NonFiniteFeature(i));
        }
    }
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let y_sd = (y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / n as f64).sqrt();
    let plain = |model| FittedModel { input_dim: d, x_mean: vec![], x_std: vec![], y_mean: 0.0, y_std: 1.0, model };
    if y_sd <= 1e-12 * (1.0 + y_mean.abs()) {
        return Ok(plain(Inner::Constant { value: y_mean }));
    }
    let model = match *spec {
        LearnerSpec::Ann(p) => {
            let (m, s) = column_stats(x);
            let xs = standardized(x, &m, &s);
            let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_sd).collect();
            let net = Ann::fit(&xs, &ys, &p, seed);
            FittedModel { input_dim: d, x_mean: m, x_std: s, y_mean, y_std: y_sd, model: Inner::Ann(net) }
        }
        LearnerSpec::Svr { kernel, c, epsilon } => {
            let (m, s) = column_stats(x);
            let rows = rows_of(&standardized(x, &m, &s));
            let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_sd).collect();
            let gamma = 1.0 / d as f64;
            let k = match kernel {
                SvrKernel::Linear => Kernel::Linear,
                SvrKernel::Rbf => Kernel::Rbf { gamma },
                SvrKernel::Poly2 => Kernel::Poly { degree: 2, gamma, coef0: 1.0 },
            };
            let max_iter = 100_000.max(100 * n);
            let svr = Svr::fit(&rows, &ys, k, c, epsilon, max_iter);
            FittedModel { input_dim: d, x_mean: m, x_std: s, y_mean, y_std: y_sd, model: Inner::Svr(svr) }
        }
        LearnerSpec::Gbm(p) => plain(Inner::Gbm(Gbm::fit(x, y, p))),
        LearnerSpec::Rf(p) => plain(Inner::Forest(Forest::fit(x, y, p, seed))),
        LearnerSpec::Knn { k } => {
            let (m, s) = column_stats(x);
            let rows = rows_of(&standardized(x, &m, &s));
            let knn = Knn { k, rows, targets: y.to_vec() };
            FittedModel { input_dim: d, x_mean: m, x_std: s, y_mean: 0.0, y_std: 1.0, model: Inner::Knn(knn) }
        }
        LearnerSpec::Ridge { lambda } => plain(Inner::Ridge(Ridge::fit(&rows_of(x), y, lambda))),
        LearnerSpec::Mean => plain(Inner::Mean),
    };
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(n: usize) -> (Array2<f64>, Vec<f64>) {
        let x = Array2::from_shape_fn((n, 2), |(i, j)| ((i * (j + 3)) % 13) as f64 / 6.0 - 1.0);
        let y = (0..n).map(|i| 2.0 * x[[i, 0]] - x[[i, 1]] + 0.5).collect();
        (x, y)
    }

    #[test]
    fn catalog_shape() {
        let c = catalog();
        assert_eq!(c.len(), 11);
        let fams: Vec<&str> = c.iter().map(|v| v.spec.family()).collect();
        assert_eq!(fams.iter().filter(|f| **f == "ann").count(), 4);
        assert_eq!(fams.iter().filter(|f| **f == "svr").count(), 3);
        assert_eq!(fams.iter().filter(|f| **f == "gbm").count(), 3);
        assert_eq!(fams.iter().filter(|f| **f == "rf").count(), 1);
        assert_eq!(blender_candidates().len(), 4);
    }

    #[test]
    fn constant_target_is_reproduced() {
        let (x, _) = data(20);
        let y = vec![300.0; 20];
        for v in catalog().iter().chain(&blender_candidates()) {
            let m = fit(&v.spec, &x, &y, 1).unwrap();
            assert!((m.predict(&[0.2, -0.3]).unwrap() - 300.0).abs() < 1e-3, "{}", v.name);
        }
    }

    #[test]
    fn one_nn_has_zero_training_error() {
        let (x, y) = data(25);
        let mut xu = x.clone();
        for i in 0..25 {
            xu[[i, 0]] = i as f64;
        }
        let m = fit(&LearnerSpec::Knn { k: 1 }, &xu, &y, 0).unwrap();
        for i in 0..25 {
            assert_eq!(m.predict(&xu.row(i).to_vec()).unwrap(), y[i]);
        }
    }

    #[test]
    fn guards() {
        let (x, y) = data(4);
        assert_eq!(fit(&LearnerSpec::Mean, &x, &y, 0), Err(LearnerError::DegenerateInput(4)));
        let (mut x, y) = data(8);
        x[[3, 1]] = f64::NAN;
        assert_eq!(fit(&LearnerSpec::Mean, &x, &y, 0), Err(LearnerError::NonFiniteFeature(3)));
        let (x, y) = data(8);
        let m = fit(&LearnerSpec::Ridge { lambda: 1.0 }, &x, &y, 0).unwrap();
        assert_eq!(m.predict(&[1.0]), Err(LearnerError::DimensionMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn every_variant_fits_a_linear_trend() {
        let (x, y) = data(60);
        for v in catalog() {
            let m = fit(&v.spec, &x, &y, 3).unwrap();
            let mae: f64 = (0..60).map(|i| (m.predict(&x.row(i).to_vec()).unwrap() - y[i]).abs()).sum::<f64>() / 60.0;
            assert!(mae < 0.35, "{} mae {mae}", v.name);
        }
    }
}
