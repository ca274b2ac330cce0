//! Hourly GHI forecasting for one day: persistence at 7am, hourly-similarity
//! models for 8–10am, and per-cluster two-layer models rolling one hour
//! ahead through the afternoon.

mod bundle;
mod m3;

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bundle::{
    merge_small_clusters, train_cluster_models, ClusterModel, ForecastBundle, MergeRecord, Strategy,
    BUNDLE_VERSION,
};
pub use m3::{clip_forecast, fold_assignment, mix_seed, train_m3, M3Config, M3Model, ModelChoice, CLEAR_SKY_CAP};

use crate::data::{DayProfile, HourRecord, FIRST_HOUR, HOURS_PER_DAY, LAST_HOUR, N_FEATURES};
use crate::learners::LearnerError;
use crate::recognition::{build_pr_vector, RecognitionError, SvmClassifier};

/// Hours forecast by the early-morning models.
pub const EARLY_HOURS: [u32; 3] = [8, 9, 10];
/// First issue hour of the one-hour-ahead models (forecasting 11am).
pub const FIRST_ISSUE_HOUR: u32 = 10;
/// Inputs of the one-hour-ahead models: the 13 features at `t` plus
/// clear-sky GHI at `t + 1`.
pub const ONE_HOUR_INPUTS: usize = N_FEATURES + 1;

#[derive(Debug, Error, PartialEq)]
pub enum ForecastError {
    #[error("too few samples: {n} (need {needed})")]
    TooFewSamples { n: usize, needed: usize },
    #[error("no learners or blenders configured")]
    EmptyCatalog,
    #[error("expected {expected} inputs, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no previous day for {0}")]
    MissingPreviousDay(NaiveDate),
    #[error("{0}: missing hour {1}")]
    MissingHour(NaiveDate, u32),
    #[error("{0}: missing {1} at hour {2}")]
    MissingFeature(NaiveDate, String, u32),
    #[error("unknown model {0}")]
    UnknownModel(String),
    #[error("cluster {0} has no model")]
    UnknownCluster(usize),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Recognition(#[from] RecognitionError),
}

/// Persistence of cloudiness: the clear-sky index at `t` carried to `t + Δ`.
/// A zero clear-sky value at `t` counts as index 1.
pub fn persistence_cloudiness(ghi_t: f64, ghi_clr_t: f64, ghi_clr_next: f64) -> f64 {
    if ghi_clr_t > 0.0 {
        ghi_t / ghi_clr_t * ghi_clr_next
    } else {
        ghi_clr_next
    }
}

fn record(day: &DayProfile, hour: u32) -> Result<&HourRecord, ForecastError> {
    day.record(hour).ok_or(ForecastError::MissingHour(day.date, hour))
}

fn clear_sky(day: &DayProfile, hour: u32) -> Result<f64, ForecastError> {
    record(day, hour)?
        .ghi_clr
        .ok_or_else(|| ForecastError::MissingFeature(day.date, "ghi_clr".into(), hour))
}

/// Input row of the one-hour-ahead model issued at hour `t`.
pub fn one_hour_features(day: &DayProfile, t: u32) -> Result<Vec<f64>, ForecastError> {
    let rec = record(day, t)?;
    let f = rec
        .feature_vector()
        .map_err(|name| ForecastError::MissingFeature(day.date, name.into(), t))?;
    let mut v = f.to_vec();
    v.push(clear_sky(day, t + 1)?);
    Ok(v)
}

/// Input row of the early-morning model for `hour`: same-day GHI from 7am
/// up to the previous hour.
pub fn early_features(day: &DayProfile, hour: u32) -> Result<Vec<f64>, ForecastError> {
    (FIRST_HOUR..hour).map(|h| record(day, h).map(|r| r.ghi)).collect()
}

/// One-hour-ahead training pairs (issue hours 10…18) of the given days.
pub fn one_hour_training_set(days: &[&DayProfile]) -> Result<(Array2<f64>, Vec<f64>), ForecastError> {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for day in days {
        for t in FIRST_ISSUE_HOUR..LAST_HOUR {
            rows.extend(one_hour_features(day, t)?);
            y.push(record(day, t + 1)?.ghi);
        }
    }
    let n = y.len();
    Ok((Array2::from_shape_vec((n, ONE_HOUR_INPUTS), rows).expect("row width"), y))
}

/// Training set of the early-morning model for `hour`.
pub fn early_training_set(days: &[&DayProfile], hour: u32) -> Result<(Array2<f64>, Vec<f64>), ForecastError> {
    let d = (hour - FIRST_HOUR) as usize;
    let mut rows = Vec::with_capacity(days.len() * d);
    let mut y = Vec::with_capacity(days.len());
    for day in days {
        rows.extend(early_features(day, hour)?);
        y.push(record(day, hour)?.ghi);
    }
    Ok((Array2::from_shape_vec((days.len(), d), rows).expect("row width"), y))
}

/// Two-layer models for 8am, 9am and 10am, trained on all training days.
pub fn train_early_morning(days: &[&DayProfile], cfg: &M3Config) -> Result<Vec<M3Model>, ForecastError> {
    EARLY_HOURS
        .iter()
        .map(|&h| {
            let (x, y) = early_training_set(days, h)?;
            let mut c = cfg.clone();
            c.seed = mix_seed(cfg.seed, 0xEA41, h as u64);
            train_m3(&x, &y, &c)
        })
        .collect()
}

/// How a day's forecasts are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DayModel {
    /// Two-layer or single-variant models, as chosen.
    Learned { choice: ModelChoice },
    /// 1DA persistence at 7am, then 1HA persistence from measured GHI.
    Persistence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayForecast {
    pub date: NaiveDate,
    pub recognized_cluster: usize,
    /// Forecasts for hours 7…19.
    pub ghi: Vec<f64>,
}

/// Previous-day 7am measurement `(ghi, clear-sky ghi)` for the 1DA model.
pub fn previous_seven_am(prev: &DayProfile) -> Result<(f64, f64), ForecastError> {
    Ok((record(prev, FIRST_HOUR)?.ghi, clear_sky(prev, FIRST_HOUR)?))
}

/// Forecasts hours 7–19 of `day`.
///
/// `prev_7am` is the previous day's 7am `(ghi, clear-sky ghi)`. The cluster is
/// recognized from the 7–10am features; the matching cluster model then
/// forecasts 11am–7pm from the measured features of each preceding hour.
pub fn forecast_day(
    bundle: &ForecastBundle,
    clf: &SvmClassifier,
    day: &DayProfile,
    prev_7am: Option<(f64, f64)>,
    model: DayModel,
) -> Result<DayForecast, ForecastError> {
    let recognized = clf.predict(&build_pr_vector(day)?)?;
    forecast_day_as(bundle, day, prev_7am, model, recognized)
}

/// [`forecast_day`] with the cluster label already known.
pub fn forecast_day_as(
    bundle: &ForecastBundle,
    day: &DayProfile,
    prev_7am: Option<(f64, f64)>,
    model: DayModel,
    cluster: usize,
) -> Result<DayForecast, ForecastError> {
    let (g7, c7) = prev_7am.ok_or(ForecastError::MissingPreviousDay(day.date))?;
    let mut out = Vec::with_capacity(HOURS_PER_DAY);
    let c_first = clear_sky(day, FIRST_HOUR)?;
    out.push(clip_forecast(persistence_cloudiness(g7, c7, c_first), Some(c_first)));
    match model {
        DayModel::Persistence => {
            for h in FIRST_HOUR + 1..=LAST_HOUR {
                let prev = record(day, h - 1)?;
                let c_prev = clear_sky(day, h - 1)?;
                let c_h = clear_sky(day, h)?;
                out.push(clip_forecast(persistence_cloudiness(prev.ghi, c_prev, c_h), Some(c_h)));
            }
        }
        DayModel::Learned { choice } => {
            for (i, &h) in EARLY_HOURS.iter().enumerate() {
                let x = early_features(day, h)?;
                out.push(bundle.early[i].predict(&x, choice, Some(clear_sky(day, h)?))?);
            }
            let cm = bundle.model_for(cluster)?;
            for t in FIRST_ISSUE_HOUR..LAST_HOUR {
                let x = one_hour_features(day, t)?;
                out.push(cm.model.predict(&x, choice, Some(clear_sky(day, t + 1)?))?);
            }
        }
    }
    Ok(DayForecast { date: day.date, recognized_cluster: cluster, ghi: out })
}
