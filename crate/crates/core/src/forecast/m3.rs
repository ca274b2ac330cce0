use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ForecastError;
use crate::learners::{blender_candidates, catalog, fit, FittedModel, LearnerVariant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct M3Config {
    pub catalog: Vec<LearnerVariant>,
    pub blenders: Vec<LearnerVariant>,
    pub folds: usize,
    pub seed: u64,
}

impl Default for M3Config {
    fn default() -> Self {
        Self { catalog: catalog(), blenders: blender_candidates(), folds: 10, seed: 0 }
    }
}

/// Which part of a trained two-layer model produces the forecast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum ModelChoice {
    /// The blender with the lowest cross-validated error.
    Selected,
    /// A fixed blender, by candidate index.
    Blender(usize),
    /// A first-layer variant alone, by catalog index.
    Variant(usize),
    /// The first-layer variant with the lowest out-of-fold error.
    BestVariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct M3Model {
    pub input_dim: usize,
    pub variant_names: Vec<String>,
    pub first_layer: Vec<FittedModel>,
    pub blender_names: Vec<String>,
    pub blenders: Vec<FittedModel>,
    pub selected: usize,
    /// `cv_table[fold][candidate]`: nMAE (%) of each blender on each fold.
    pub cv_table: Vec<Vec<f64>>,
    /// Out-of-fold nMAE (%) of each first-layer variant used alone.
    pub variant_cv_nmae: Vec<f64>,
    pub best_variant: usize,
    pub n_samples: usize,
}

/// SplitMix64 step, used to derive independent seeds.
pub fn mix_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold of every sample: a seeded shuffle cut into `folds` near-equal
/// contiguous chunks.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = vec![0; n];
    for (pos, i) in order.into_iter().enumerate() {
        out[i] = pos * folds / n;
    }
    out
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// nMAE (%) normalized by the mean target, falling back to `fallback` when
/// that mean is not positive.
fn fold_nmae(actual: &[f64], pred: &[f64], fallback: f64) -> f64 {
    let m = mean(actual);
    let basis = if m > 0.0 { m } else if fallback > 0.0 { fallback } else { 1.0 };
    100.0 * actual.iter().zip(pred).map(|(a, p)| (a - p).abs()).sum::<f64>() / actual.len() as f64 / basis
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

/// Trains both layers. Out-of-fold first-layer predictions (each fold
/// predicted by variants refit on the other folds) are the blender inputs;
/// blenders are scored fold by fold on them and all are refit on the full
/// out-of-fold matrix.
pub fn train_m3(x: &Array2<f64>, y: &[f64], cfg: &M3Config) -> Result<M3Model, ForecastError> {
    let n = x.nrows();
    let needed = cfg.folds.max(crate::learners::MIN_SAMPLES + 1);
    if n < needed || cfg.folds < 2 {
        return Err(ForecastError::TooFewSamples { n, needed });
    }
    if cfg.catalog.is_empty() || cfg.blenders.is_empty() {
        return Err(ForecastError::EmptyCatalog);
    }
    let folds = cfg.folds;
    let v_count = cfg.catalog.len();
    let fold_of = fold_assignment(n, folds, mix_seed(cfg.seed, 0xF01D, 0));
    let fold_rows: Vec<(Vec<usize>, Vec<usize>)> =
        (0..folds).map(|f| (0..n).partition(|&i| fold_of[i] != f)).collect();

    let jobs: Vec<(usize, usize)> = (0..folds).flat_map(|f| (0..v_count).map(move |v| (f, v))).collect();
    let oof_parts: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(f, v)| {
            let (train, test) = &fold_rows[f];
            let xt = x.select(Axis(0), train);
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let m = fit(&cfg.catalog[v].spec, &xt, &yt, mix_seed(cfg.seed, v as u64 + 1, f as u64 + 1))?;
            Ok(test.iter().map(|&i| m.predict_unchecked(&x.row(i).to_vec())).collect())
        })
        .collect::<Result<_, ForecastError>>()?;
    let mut z = Array2::zeros((n, v_count));
    for (&(f, v), preds) in jobs.iter().zip(&oof_parts) {
        for (&i, p) in fold_rows[f].1.iter().zip(preds) {
            z[[i, v]] = *p;
        }
    }

    let first_layer: Vec<FittedModel> = (0..v_count)
        .into_par_iter()
        .map(|v| fit(&cfg.catalog[v].spec, x, y, mix_seed(cfg.seed, v as u64 + 1, 0)).map_err(ForecastError::from))
        .collect::<Result<_, _>>()?;

    let overall = mean(y);
    let variant_cv_nmae: Vec<f64> = (0..v_count)
        .map(|v| fold_nmae(y, &z.column(v).to_vec(), overall))
        .collect();

    let b_count = cfg.blenders.len();
    let cells: Vec<(usize, usize)> = (0..folds).flat_map(|f| (0..b_count).map(move |b| (f, b))).collect();
    let scores: Vec<f64> = cells
        .par_iter()
        .map(|&(f, b)| {
            let (train, test) = &fold_rows[f];
            let zt = z.select(Axis(0), train);
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let m = fit(&cfg.blenders[b].spec, &zt, &yt, mix_seed(cfg.seed, 0xB1E0 + b as u64, f as u64 + 1))?;
            let pred: Vec<f64> = test.iter().map(|&i| m.predict_unchecked(&z.row(i).to_vec())).collect();
            let act: Vec<f64> = test.iter().map(|&i| y[i]).collect();
            Ok(fold_nmae(&act, &pred, overall))
        })
        .collect::<Result<_, ForecastError>>()?;
    let cv_table: Vec<Vec<f64>> = scores.chunks(b_count).map(|c| c.to_vec()).collect();
    let mean_cv: Vec<f64> = (0..b_count).map(|b| cv_table.iter().map(|r| r[b]).sum::<f64>() / folds as f64).collect();
    let selected = argmin(&mean_cv);

    let blenders: Vec<FittedModel> = (0..b_count)
        .into_par_iter()
        .map(|b| fit(&cfg.blenders[b].spec, &z, y, mix_seed(cfg.seed, 0xB1E0 + b as u64, 0)).map_err(ForecastError::from))
        .collect::<Result<_, _>>()?;

    Ok(M3Model {
        input_dim: x.ncols(),
        variant_names: cfg.catalog.iter().map(|v| v.name.clone()).collect(),
        first_layer,
        blender_names: cfg.blenders.iter().map(|v| v.name.clone()).collect(),
        blenders,
        selected,
        cv_table,
        best_variant: argmin(&variant_cv_nmae),
        variant_cv_nmae,
        n_samples: n,
    })
}

impl M3Model {
    /// Mean cross-validated nMAE per blender candidate.
    pub fn mean_cv_nmae(&self) -> Vec<f64> {
        let folds = self.cv_table.len() as f64;
        (0..self.blenders.len()).map(|b| self.cv_table.iter().map(|r| r[b]).sum::<f64>() / folds).collect()
    }

    pub fn selected_blender(&self) -> &str {
        &self.blender_names[self.selected]
    }

    /// First-layer outputs in catalog order.
    pub fn first_layer_outputs(&self, x: &[f64]) -> Result<Vec<f64>, ForecastError> {
        if x.len() != self.input_dim {
            return Err(ForecastError::DimensionMismatch { expected: self.input_dim, got: x.len() });
        }
        Ok(self.first_layer.iter().map(|m| m.predict_unchecked(x)).collect())
    }

    /// Unclipped output of `choice`.
    pub fn predict_raw(&self, x: &[f64], choice: ModelChoice) -> Result<f64, ForecastError> {
        if x.len() != self.input_dim {
            return Err(ForecastError::DimensionMismatch { expected: self.input_dim, got: x.len() });
        }
        let blend = |b: usize| -> Result<f64, ForecastError> {
            let z = self.first_layer_outputs(x)?;
            Ok(self.blenders[b].predict_unchecked(&z))
        };
        match choice {
            ModelChoice::Selected => blend(self.selected),
            ModelChoice::Blender(b) if b < self.blenders.len() => blend(b),
            ModelChoice::Variant(v) if v < self.first_layer.len() => Ok(self.first_layer[v].predict_unchecked(x)),
            ModelChoice::BestVariant => Ok(self.first_layer[self.best_variant].predict_unchecked(x)),
            other => Err(ForecastError::UnknownModel(format!("{other:?}"))),
        }
    }

    /// Output of `choice`, clipped to `[0, 1.2 × clear_sky]` when clear-sky
    /// GHI is supplied and to non-negative values otherwise.
    pub fn predict(&self, x: &[f64], choice: ModelChoice, clear_sky: Option<f64>) -> Result<f64, ForecastError> {
        Ok(clip_forecast(self.predict_raw(x, choice)?, clear_sky))
    }
}

/// Upper bound of a forecast relative to clear-sky GHI.
pub const CLEAR_SKY_CAP: f64 = 1.2;

pub fn clip_forecast(v: f64, clear_sky: Option<f64>) -> f64 {
    let v = if v.is_nan() { 0.0 } else { v };
    match clear_sky {
        Some(c) => v.clamp(0.0, (CLEAR_SKY_CAP * c).max(0.0)),
        None => v.max(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{LearnerSpec, LearnerVariant};

    fn small_cfg() -> M3Config {
        M3Config {
            catalog: vec![
                LearnerVariant::new("ridge1", LearnerSpec::Ridge { lambda: 1e-6 }),
                LearnerVariant::new("knn3", LearnerSpec::Knn { k: 3 }),
            ],
            blenders: vec![
                LearnerVariant::new("ridge", LearnerSpec::Ridge { lambda: 1.0 }),
                LearnerVariant::new("knn", LearnerSpec::Knn { k: 5 }),
            ],
            folds: 10,
            seed: 7,
        }
    }

    fn linear(n: usize) -> (Array2<f64>, Vec<f64>) {
        let x = Array2::from_shape_fn((n, 2), |(i, j)| ((i * (2 * j + 3)) % 17) as f64);
        let y = (0..n).map(|i| 10.0 + 3.0 * x[[i, 0]] + x[[i, 1]]).collect();
        (x, y)
    }

    #[test]
    fn folds_are_balanced() {
        let f = fold_assignment(23, 10, 1);
        let mut counts = vec![0; 10];
        f.iter().for_each(|&i| counts[i] += 1);
        assert!(counts.iter().all(|&c| c == 2 || c == 3));
    }

    #[test]
    fn cv_table_shape_and_selection() {
        let (x, y) = linear(60);
        let m = train_m3(&x, &y, &small_cfg()).unwrap();
        assert_eq!(m.cv_table.len(), 10);
        assert!(m.cv_table.iter().all(|r| r.len() == 2));
        let means = m.mean_cv_nmae();
        assert!(means.iter().all(|&v| means[m.selected] <= v));
        assert_eq!(m.first_layer_outputs(&[1.0, 2.0]).unwrap().len(), 2);
        let again = train_m3(&x, &y, &small_cfg()).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn single_variant_with_mean_blender_is_that_variant() {
        let (x, y) = linear(40);
        let cfg = M3Config {
            catalog: vec![LearnerVariant::new("knn3", LearnerSpec::Knn { k: 3 })],
            blenders: vec![LearnerVariant::new("mean", LearnerSpec::Mean)],
            folds: 5,
            seed: 1,
        };
        let m = train_m3(&x, &y, &cfg).unwrap();
        for p in [[0.5, 3.0], [7.0, 1.0]] {
            let a = m.predict_raw(&p, ModelChoice::Selected).unwrap();
            let b = m.predict_raw(&p, ModelChoice::Variant(0)).unwrap();
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn clipping_rules() {
        assert_eq!(clip_forecast(-5.0, None), 0.0);
        assert_eq!(clip_forecast(900.0, Some(500.0)), 600.0);
        assert_eq!(clip_forecast(300.0, Some(500.0)), 300.0);
    }

    #[test]
    fn too_few_samples() {
        let (x, y) = linear(8);
        assert_eq!(train_m3(&x, &y, &small_cfg()).unwrap_err(), ForecastError::TooFewSamples { n: 8, needed: 10 });
    }
}
