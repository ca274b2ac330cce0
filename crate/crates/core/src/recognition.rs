//! Day-type recognition: a one-vs-one support vector classifier over the
//! features of the first four daytime hours.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DayProfile, FEATURE_NAMES, N_FEATURES};
use crate::smo::{Kernel, QpProblem};

/// Hours whose features form the recognition vector.
pub const PR_HOURS: [u32; 4] = [7, 8, 9, 10];
/// Length of a recognition vector.
pub const PR_DIM: usize = N_FEATURES * PR_HOURS.len();

pub const CLASSIFIER_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum RecognitionError {
    #[error("missing hour {0}")]
    MissingHour(u32),
    #[error("missing feature {0} at hour {1}")]
    MissingFeature(String, u32),
    #[error("empty fit set")]
    EmptyFitSet,
    #[error("training data holds a single class")]
    SingleClassInput,
    #[error("solver did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("classifier has no trained sub-models")]
    UntrainedClassifier,
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("confusion matrix is empty")]
    EmptyConfusion,
    #[error("{0} labels for {1} vectors")]
    LengthMismatch(usize, usize),
}

/// The 52-value vector of a day: all features at 7am, then 8am, 9am, 10am.
pub fn build_pr_vector(day: &DayProfile) -> Result<Vec<f64>, RecognitionError> {
    let mut v = Vec::with_capacity(PR_DIM);
    for h in PR_HOURS {
        let rec = day.record(h).ok_or(RecognitionError::MissingHour(h))?;
        let f = rec.feature_vector().map_err(|name| RecognitionError::MissingFeature(name.to_string(), h))?;
        v.extend_from_slice(&f);
    }
    debug_assert_eq!(v.len(), PR_DIM);
    Ok(v)
}

/// Names of the recognition vector entries, e.g. `ghi@7`.
pub fn pr_feature_names() -> Vec<String> {
    PR_HOURS
        .iter()
        .flat_map(|h| FEATURE_NAMES.iter().map(move |f| format!("{f}@{h}")))
        .collect()
}

/// Per-dimension z-scoring fit on training vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Population statistics; constant dimensions get unit spread.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, RecognitionError> {
        let first = rows.first().ok_or(RecognitionError::EmptyFitSet)?;
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            if r.len() != d {
                return Err(RecognitionError::DimensionMismatch { expected: d, got: r.len() });
            }
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 * (1.0 + m.abs()) { sd } else { 1.0 }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| (x - m) / s).collect()
    }
}

/// A two-class machine; positive decision values vote for `positive`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub kernel: Kernel,
    pub c: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// Dual coefficients `α_i` of the support vectors, each in `[0, C]`.
    pub alpha: Vec<f64>,
    /// Labels (±1) of the support vectors.
    pub y: Vec<f64>,
    /// Bias `ψ`; decision value is `Σ α_i y_i K(s_i, x) + ψ`.
    pub bias: f64,
    pub iterations: usize,
}

impl BinarySvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(self.alpha.iter().zip(&self.y))
            .map(|(s, (a, y))| a * y * self.kernel.eval(s, x))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        if self.decision(x) >= 0.0 { 1.0 } else { -1.0 }
    }

    /// `Σ α_i y_i`, zero for a feasible dual solution.
    pub fn dual_balance(&self) -> f64 {
        self.alpha.iter().zip(&self.y).map(|(a, y)| a * y).sum()
    }
}

pub const DEFAULT_TOL: f64 = 1e-3;
const MAX_ITER_FLOOR: usize = 100_000;

/// Trains a soft-margin classifier on ±1 labels.
pub fn train_svm_binary(
    x: &[Vec<f64>],
    y: &[f64],
    c: f64,
    kernel: Kernel,
    tol: f64,
) -> Result<BinarySvm, RecognitionError> {
    if x.len() != y.len() {
        return Err(RecognitionError::LengthMismatch(y.len(), x.len()));
    }
    let has_pos = y.iter().any(|&v| v > 0.0);
    let has_neg = y.iter().any(|&v| v < 0.0);
    if !(has_pos && has_neg) {
        return Err(RecognitionError::SingleClassInput);
    }
    let n = x.len();
    let gram = kernel.gram(x);
    let qp = QpProblem { gram: &gram, n, y: y.to_vec(), p: vec![-1.0; n], upper: vec![c; n] };
    let max_iter = MAX_ITER_FLOOR.max(100 * n);
    let sol = qp.solve(tol, max_iter);
    if !sol.converged {
        return Err(RecognitionError::NoConvergence(max_iter));
    }
    let mut svm = BinarySvm {
        kernel,
        c,
        support_vectors: Vec::new(),
        alpha: Vec::new(),
        y: Vec::new(),
        bias: -sol.rho,
        iterations: sol.iterations,
    };
    for i in 0..n {
        if sol.alpha[i] > 0.0 {
            svm.support_vectors.push(x[i].clone());
            svm.alpha.push(sol.alpha[i]);
            svm.y.push(y[i]);
        }
    }
    Ok(svm)
}

/// How the kernel width enters the exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelForm {
    /// `exp(-‖x − x'‖ / (2ϱ²))`
    #[default]
    Unsquared,
    /// `exp(-‖x − x'‖² / (2ϱ²))`
    Squared,
}

impl KernelForm {
    pub fn kernel(self, rho: f64) -> Kernel {
        match self {
            KernelForm::Unsquared => Kernel::Exponential { rho },
            KernelForm::Squared => Kernel::Gaussian { rho },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c_grid: Vec<f64>,
    /// Multiples of the median pairwise distance of the scaled training set.
    pub rho_factors: Vec<f64>,
    pub folds: usize,
    pub kernel_form: KernelForm,
    pub tol: f64,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c_grid: vec![0.1, 1.0, 10.0, 100.0],
            rho_factors: vec![0.5, 1.0, 2.0],
            folds: 5,
            kernel_form: KernelForm::Unsquared,
            tol: DEFAULT_TOL,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub positive: usize,
    pub negative: usize,
    pub model: BinarySvm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub c: f64,
    pub rho: f64,
    pub cv_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmClassifier {
    pub version: u32,
    /// Sorted class labels.
    pub classes: Vec<usize>,
    pub scaler: Scaler,
    pub c: f64,
    pub rho: f64,
    pub kernel_form: KernelForm,
    pub pairs: Vec<PairModel>,
    pub grid: Vec<GridScore>,
}

impl SvmClassifier {
    /// One-vs-one majority vote on an unscaled vector; ties go to the
    /// lowest label.
    pub fn predict(&self, v: &[f64]) -> Result<usize, RecognitionError> {
        if v.len() != self.scaler.dim() {
            return Err(RecognitionError::DimensionMismatch { expected: self.scaler.dim(), got: v.len() });
        }
        predict_scaled(&self.classes, &self.pairs, &self.scaler.apply(v))
    }
}

fn predict_scaled(classes: &[usize], pairs: &[PairModel], x: &[f64]) -> Result<usize, RecognitionError> {
    if classes.len() == 1 {
        return Ok(classes[0]);
    }
    if pairs.is_empty() {
        return Err(RecognitionError::UntrainedClassifier);
    }
    let mut votes = vec![0usize; classes.len()];
    for p in pairs {
        let winner = if p.model.decision(x) >= 0.0 { p.positive } else { p.negative };
        votes[classes.binary_search(&winner).expect("pair label among classes")] += 1;
    }
    let mut best = 0;
    for (i, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = i;
        }
    }
    Ok(classes[best])
}

pub fn predict_label(clf: &SvmClassifier, v: &[f64]) -> Result<usize, RecognitionError> {
    clf.predict(v)
}

fn sorted_classes(labels: &[usize]) -> Vec<usize> {
    let mut c = labels.to_vec();
    c.sort_unstable();
    c.dedup();
    c
}

/// Trains all class pairs on already-scaled vectors.
fn train_pairs(
    x: &[Vec<f64>],
    labels: &[usize],
    classes: &[usize],
    c: f64,
    kernel: Kernel,
    tol: f64,
) -> Result<Vec<PairModel>, RecognitionError> {
    let mut jobs = Vec::new();
    for (a, &pos) in classes.iter().enumerate() {
        for &neg in &classes[a + 1..] {
            jobs.push((pos, neg));
        }
    }
    jobs.into_par_iter()
        .map(|(pos, neg)| {
            let (xs, ys): (Vec<Vec<f64>>, Vec<f64>) = x
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == pos || l == neg)
                .map(|(r, &l)| (r.clone(), if l == pos { 1.0 } else { -1.0 }))
                .unzip();
            let model = train_svm_binary(&xs, &ys, c, kernel, tol)?;
            Ok(PairModel { positive: pos, negative: neg, model })
        })
        .collect()
}

/// Median Euclidean distance over all pairs of rows.
pub fn median_pairwise_distance(x: &[Vec<f64>]) -> f64 {
    let mut d = Vec::with_capacity(x.len() * x.len().saturating_sub(1) / 2);
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            d.push(x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let med = if m % 2 == 1 { d[m / 2] } else { 0.5 * (d[m / 2 - 1] + d[m / 2]) };
    if med > 0.0 { med } else { 1.0 }
}

/// Fold index per sample: each class is shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0; labels.len()];
    let mut offset = 0;
    for class in sorted_classes(labels) {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for (pos, i) in idx.into_iter().enumerate() {
            out[i] = (pos + offset) % folds;
        }
        offset += 1;
    }
    out
}

fn cv_accuracy(
    x: &[Vec<f64>],
    labels: &[usize],
    fold_of: &[usize],
    folds: usize,
    c: f64,
    kernel: Kernel,
    tol: f64,
) -> Result<f64, RecognitionError> {
    let mut correct = 0usize;
    for f in 0..folds {
        let (tr, te): (Vec<usize>, Vec<usize>) = (0..x.len()).partition(|&i| fold_of[i] != f);
        if te.is_empty() {
            continue;
        }
        let xt: Vec<Vec<f64>> = tr.iter().map(|&i| x[i].clone()).collect();
        let lt: Vec<usize> = tr.iter().map(|&i| labels[i]).collect();
        let classes = sorted_classes(&lt);
        let pairs = train_pairs(&xt, &lt, &classes, c, kernel, tol)?;
        for &i in &te {
            if predict_scaled(&classes, &pairs, &x[i])? == labels[i] {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / x.len() as f64)
}

/// Fits the scaler, selects `(C, ϱ)` by stratified cross-validated accuracy
/// (first best in grid order) and trains the final one-vs-one machines.
pub fn train_classifier(
    vectors: &[Vec<f64>],
    labels: &[usize],
    params: &SvmParams,
) -> Result<SvmClassifier, RecognitionError> {
    if vectors.len() != labels.len() {
        return Err(RecognitionError::LengthMismatch(labels.len(), vectors.len()));
    }
    let scaler = Scaler::fit(vectors)?;
    let classes = sorted_classes(labels);
    if classes.len() < 2 {
        return Err(RecognitionError::SingleClassInput);
    }
    let x: Vec<Vec<f64>> = vectors.iter().map(|v| scaler.apply(v)).collect();
    let med = median_pairwise_distance(&x);
    let fold_of = stratified_folds(labels, params.folds, params.seed);

    let combos: Vec<(f64, f64)> = params
        .c_grid
        .iter()
        .flat_map(|&c| params.rho_factors.iter().map(move |&f| (c, f * med)))
        .collect();
    let grid: Vec<GridScore> = combos
        .par_iter()
        .map(|&(c, rho)| {
            let kernel = params.kernel_form.kernel(rho);
            let acc = cv_accuracy(&x, labels, &fold_of, params.folds, c, kernel, params.tol)?;
            Ok(GridScore { c, rho, cv_accuracy: acc })
        })
        .collect::<Result<_, RecognitionError>>()?;
    let mut best = 0;
    for (i, g) in grid.iter().enumerate() {
        if g.cv_accuracy > grid[best].cv_accuracy {
            best = i;
        }
    }
    let (c, rho) = (grid[best].c, grid[best].rho);
    let pairs = train_pairs(&x, labels, &classes, c, params.kernel_form.kernel(rho), params.tol)?;
    Ok(SvmClassifier {
        version: CLASSIFIER_VERSION,
        classes,
        scaler,
        c,
        rho,
        kernel_form: params.kernel_form,
        pairs,
        grid,
    })
}

/// Trains with fixed hyperparameters and no search.
pub fn train_classifier_fixed(
    vectors: &[Vec<f64>],
    labels: &[usize],
    c: f64,
    rho: f64,
    kernel_form: KernelForm,
) -> Result<SvmClassifier, RecognitionError> {
    let scaler = Scaler::fit(vectors)?;
    let classes = sorted_classes(labels);
    if classes.len() < 2 {
        return Err(RecognitionError::SingleClassInput);
    }
    let x: Vec<Vec<f64>> = vectors.iter().map(|v| scaler.apply(v)).collect();
    let pairs = train_pairs(&x, labels, &classes, c, kernel_form.kernel(rho), DEFAULT_TOL)?;
    Ok(SvmClassifier { version: CLASSIFIER_VERSION, classes, scaler, c, rho, kernel_form, pairs, grid: Vec::new() })
}

/// Sensitivity per actual class, precision per recognized class and
/// overall accuracy, all as fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrMetrics {
    pub sensitivity: Vec<f64>,
    pub precision: Vec<f64>,
    pub accuracy: f64,
}

/// `confusion[r][a]` counts days recognized as `r` whose actual class is `a`.
/// Classes with an empty column (row) get sensitivity (precision) 0.
pub fn pr_metrics(confusion: &[Vec<u64>]) -> Result<PrMetrics, RecognitionError> {
    let k = confusion.len();
    if let Some(r) = confusion.iter().find(|r| r.len() != k) {
        return Err(RecognitionError::DimensionMismatch { expected: k, got: r.len() });
    }
    let total: u64 = confusion.iter().flatten().sum();
    if total == 0 {
        return Err(RecognitionError::EmptyConfusion);
    }
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let sensitivity = (0..k).map(|a| ratio(confusion[a][a], (0..k).map(|r| confusion[r][a]).sum())).collect();
    let precision = (0..k).map(|r| ratio(confusion[r][r], confusion[r].iter().sum())).collect();
    let trace: u64 = (0..k).map(|i| confusion[i][i]).sum();
    Ok(PrMetrics { sensitivity, precision, accuracy: ratio(trace, total) })
}

/// Builds a confusion matrix over `classes` (rows recognized, columns actual).
pub fn confusion_matrix(classes: &[usize], recognized: &[usize], actual: &[usize]) -> Vec<Vec<u64>> {
    let k = classes.len();
    let mut m = vec![vec![0u64; k]; k];
    for (r, a) in recognized.iter().zip(actual) {
        if let (Some(ri), Some(ai)) = (classes.iter().position(|c| c == r), classes.iter().position(|c| c == a)) {
            m[ri][ai] += 1;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::HourRecord;
    use chrono::NaiveDate;

    fn day(skip_img_at: Option<u32>) -> DayProfile {
        let date = NaiveDate::from_ymd_opt(2021, 6, 1).unwrap();
        let recs = (7..=19)
            .map(|h| HourRecord {
                timestamp: date.and_hms_opt(h, 0, 0).unwrap(),
                ghi: 100.0 * h as f64,
                ghi_clr: Some(120.0 * h as f64),
                dni: 1.0,
                dhi: 2.0,
                temp: 3.0,
                rh: 4.0,
                pres: 5.0,
                ws: 6.0,
                wd: 7.0,
                img_mu: if Some(h) == skip_img_at { None } else { Some(0.1) },
                img_sigma: Some(0.2),
                img_entropy: Some(0.3),
                image_path: None,
            })
            .collect();
        DayProfile::new(date, recs)
    }

    #[test]
    fn pr_vector_shape_and_window() {
        let d = day(None);
        let v = build_pr_vector(&d).unwrap();
        assert_eq!(v.len(), 52);
        assert_eq!(v[0], 700.0);
        assert_eq!(v[13], 800.0);
        let mut other = d.clone();
        other.records[4].ghi = -1.0; // 11am
        assert_eq!(build_pr_vector(&other).unwrap(), v);
        assert_eq!(pr_feature_names()[14], "ghi_clr@8");
    }

    #[test]
    fn pr_vector_missing_feature() {
        assert_eq!(build_pr_vector(&day(Some(9))), Err(RecognitionError::MissingFeature("img_mu".into(), 9)));
    }

    #[test]
    fn scaler_arithmetic() {
        let s = Scaler::fit(&[vec![0.0, 5.0], vec![2.0, 5.0]]).unwrap();
        assert_eq!(s.mean, vec![1.0, 5.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
        assert_eq!(s.apply(&[4.0, 5.0]), vec![3.0, 0.0]);
        assert_eq!(Scaler::fit(&[]), Err(RecognitionError::EmptyFitSet));
    }

    #[test]
    fn separable_line() {
        let x = vec![vec![-2.0], vec![-1.0], vec![1.0], vec![2.0]];
        let y = vec![-1.0, -1.0, 1.0, 1.0];
        let m = train_svm_binary(&x, &y, 10.0, Kernel::Linear, 1e-6).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(m.predict(xi), *yi);
        }
        assert!(m.dual_balance().abs() < 1e-9);
    }

    #[test]
    fn xor_with_rbf() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let y = vec![-1.0, -1.0, 1.0, 1.0];
        for kernel in [Kernel::Exponential { rho: 0.5 }, Kernel::Gaussian { rho: 0.5 }] {
            let m = train_svm_binary(&x, &y, 100.0, kernel, 1e-6).unwrap();
            for (xi, yi) in x.iter().zip(&y) {
                assert_eq!(m.predict(xi), *yi);
            }
            assert!(m.alpha.iter().all(|&a| (0.0..=100.0).contains(&a)));
        }
    }

    #[test]
    fn single_class_rejected() {
        assert_eq!(
            train_svm_binary(&[vec![0.0], vec![1.0]], &[1.0, 1.0], 1.0, Kernel::Linear, 1e-3).unwrap_err(),
            RecognitionError::SingleClassInput
        );
        assert_eq!(
            train_classifier(&[vec![0.0], vec![1.0]], &[2, 2], &SvmParams::default()).unwrap_err(),
            RecognitionError::SingleClassInput
        );
    }

    #[test]
    fn vote_tie_goes_to_lowest_label() {
        // three pairwise models that each vote for a different class
        let always = |sign: f64| BinarySvm {
            kernel: Kernel::Linear,
            c: 1.0,
            support_vectors: vec![],
            alpha: vec![],
            y: vec![],
            bias: sign,
            iterations: 0,
        };
        let pairs = vec![
            PairModel { positive: 0, negative: 1, model: always(1.0) },
            PairModel { positive: 0, negative: 2, model: always(-1.0) },
            PairModel { positive: 1, negative: 2, model: always(1.0) },
        ];
        assert_eq!(predict_scaled(&[0, 1, 2], &pairs, &[0.0]).unwrap(), 0);
        assert_eq!(predict_scaled(&[0, 1, 2], &[], &[0.0]), Err(RecognitionError::UntrainedClassifier));
    }

    #[test]
    fn table_two_metrics() {
        let m = pr_metrics(&[vec![36, 2, 0], vec![3, 31, 8], vec![1, 3, 11]]).unwrap();
        let pct = |v: f64| (v * 1000.0).round() / 10.0;
        assert_eq!(m.sensitivity.iter().map(|&v| pct(v)).collect::<Vec<_>>(), vec![90.0, 86.1, 57.9]);
        assert_eq!(m.precision.iter().map(|&v| pct(v)).collect::<Vec<_>>(), vec![94.7, 73.8, 73.3]);
        assert_eq!(pct(m.accuracy), 82.1);
    }

    #[test]
    fn constant_classifier_metrics() {
        let m = pr_metrics(&[vec![3, 3, 3], vec![0, 0, 0], vec![0, 0, 0]]).unwrap();
        assert_eq!(m.sensitivity, vec![1.0, 0.0, 0.0]);
        assert!((m.accuracy - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(pr_metrics(&[vec![0]]), Err(RecognitionError::EmptyConfusion));
    }
}
