//! Forecast error metrics, improvements between model groups, and grouped
//! reports by month, hour and cluster.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const GROUP_UC_M3: &str = "uc-m3";
pub const GROUP_UC_SAML: &str = "uc-saml";
pub const GROUP_AIO_M3: &str = "aio-m3";
pub const GROUP_AIO_SAML: &str = "aio-saml";
pub const GROUPS: [&str; 4] = [GROUP_UC_M3, GROUP_UC_SAML, GROUP_AIO_M3, GROUP_AIO_SAML];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {0} actual vs {1} forecast values")]
    LengthMismatch(usize, usize),
    #[error("empty series")]
    EmptySeries,
    #[error("normalization basis must be positive, got {0}")]
    ZeroBasis(f64),
    #[error("reference error must be positive, got {0}")]
    ZeroReference(f64),
    #[error("no forecast records")]
    EmptyResults,
    #[error("bad normalization rule {0:?}")]
    BadRule(String),
    #[error("bad report row: {0}")]
    BadRow(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// How the error denominator is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum NormalizationRule {
    /// Mean measured GHI over the evaluation set.
    #[default]
    MeanActual,
    /// A fixed value such as plant capacity, in W/m².
    Capacity(f64),
    MaxActual,
}

impl fmt::Display for NormalizationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MeanActual => f.write_str("mean_actual"),
            Self::Capacity(v) => write!(f, "capacity:{v}"),
            Self::MaxActual => f.write_str("max_actual"),
        }
    }
}

impl FromStr for NormalizationRule {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean_actual" => Ok(Self::MeanActual),
            "max_actual" => Ok(Self::MaxActual),
            _ => s
                .strip_prefix("capacity:")
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|v| v.is_finite() && *v > 0.0)
                .map(Self::Capacity)
                .ok_or_else(|| EvalError::BadRule(s.to_string())),
        }
    }
}

impl Serialize for NormalizationRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NormalizationRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl NormalizationRule {
    pub fn basis(&self, actual: &[f64]) -> Result<f64, EvalError> {
        if actual.is_empty() {
            return Err(EvalError::EmptySeries);
        }
        let b = match self {
            Self::MeanActual => actual.iter().sum::<f64>() / actual.len() as f64,
            Self::Capacity(v) => *v,
            Self::MaxActual => actual.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        };
        if b > 0.0 {
            Ok(b)
        } else {
            Err(EvalError::ZeroBasis(b))
        }
    }
}

fn check(actual: &[f64], forecast: &[f64], basis: f64) -> Result<(), EvalError> {
    if actual.len() != forecast.len() {
        return Err(EvalError::LengthMismatch(actual.len(), forecast.len()));
    }
    if actual.is_empty() {
        return Err(EvalError::EmptySeries);
    }
    if !(basis > 0.0) {
        return Err(EvalError::ZeroBasis(basis));
    }
    Ok(())
}

/// Normalized mean absolute error, in percent.
pub fn nmae(actual: &[f64], forecast: &[f64], basis: f64) -> Result<f64, EvalError> {
    check(actual, forecast, basis)?;
    let s: f64 = actual.iter().zip(forecast).map(|(a, f)| (a - f).abs()).sum();
    Ok(100.0 * s / actual.len() as f64 / basis)
}

/// Normalized root mean square error, in percent.
pub fn nrmse(actual: &[f64], forecast: &[f64], basis: f64) -> Result<f64, EvalError> {
    check(actual, forecast, basis)?;
    let s: f64 = actual.iter().zip(forecast).map(|(a, f)| (a - f) * (a - f)).sum();
    Ok(100.0 * (s / actual.len() as f64).sqrt() / basis)
}

/// Relative improvement of `err_cmp` over `err_ref`, in percent. Positive
/// means the compared model is better.
pub fn improvement(err_ref: f64, err_cmp: f64) -> Result<f64, EvalError> {
    if !(err_ref > 0.0) {
        return Err(EvalError::ZeroReference(err_ref));
    }
    Ok(100.0 * (err_ref - err_cmp) / err_ref)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorScore {
    pub nmae: f64,
    pub nrmse: f64,
    pub n: usize,
    pub basis: f64,
}

impl ErrorScore {
    pub fn compute(actual: &[f64], forecast: &[f64], basis: f64) -> Result<Self, EvalError> {
        Ok(Self { nmae: nmae(actual, forecast, basis)?, nrmse: nrmse(actual, forecast, basis)?, n: actual.len(), basis })
    }
}

/// One hourly forecast of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub date: NaiveDate,
    pub hour: u32,
    pub actual: f64,
    pub forecast: f64,
    pub group: String,
    pub model: String,
    pub cluster: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    Overall,
    Month,
    Hour,
    Cluster,
}

impl Grouping {
    pub const ALL: [Grouping; 4] = [Grouping::Overall, Grouping::Month, Grouping::Hour, Grouping::Cluster];

    pub fn name(self) -> &'static str {
        match self {
            Grouping::Overall => "overall",
            Grouping::Month => "month",
            Grouping::Hour => "hour",
            Grouping::Cluster => "cluster",
        }
    }

    /// Breakdown key of a record; zero-padded so string order matches
    /// numeric order.
    pub fn key(self, r: &ForecastRecord) -> String {
        match self {
            Grouping::Overall => "all".into(),
            Grouping::Month => format!("{:02}", r.date.month()),
            Grouping::Hour => format!("{:02}", r.hour),
            Grouping::Cluster => format!("{}", r.cluster),
        }
    }
}

impl FromStr for Grouping {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|g| g.name() == s).ok_or_else(|| EvalError::BadRow(format!("breakdown {s:?}")))
    }
}

/// `breakdown → key → score` for one model.
pub type Breakdown = BTreeMap<Grouping, BTreeMap<String, ErrorScore>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementScore {
    /// `c/a` (per-cluster over all-in-one) or `m/s` (blended over single model).
    pub kind: String,
    pub reference: String,
    pub compared: String,
    pub impa: f64,
    pub impr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub normalization: NormalizationRule,
    pub basis: f64,
    /// `group → model → breakdown`.
    pub groups: BTreeMap<String, BTreeMap<String, Breakdown>>,
    #[serde(default)]
    pub improvements: Vec<ImprovementScore>,
}

/// Normalization basis over the distinct `(date, hour)` actuals of `records`.
pub fn records_basis(records: &[ForecastRecord], rule: NormalizationRule) -> Result<f64, EvalError> {
    let mut actual = BTreeMap::new();
    for r in records {
        actual.entry((r.date, r.hour)).or_insert(r.actual);
    }
    let v: Vec<f64> = actual.into_values().collect();
    rule.basis(&v)
}

/// Scores of every model per breakdown key, sharing one basis.
pub fn grouped_scores(
    records: &[ForecastRecord],
    grouping: Grouping,
    basis: f64,
) -> Result<BTreeMap<(String, String, String), ErrorScore>, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyResults);
    }
    let mut series: BTreeMap<(String, String, String), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let e = series.entry((r.group.clone(), r.model.clone(), grouping.key(r))).or_default();
        e.0.push(r.actual);
        e.1.push(r.forecast);
    }
    series.into_iter().map(|(k, (a, f))| Ok((k, ErrorScore::compute(&a, &f, basis)?))).collect()
}

/// Full report over every breakdown.
pub fn grouped_report(records: &[ForecastRecord], rule: NormalizationRule) -> Result<EvaluationReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyResults);
    }
    let basis = records_basis(records, rule)?;
    let mut groups: BTreeMap<String, BTreeMap<String, Breakdown>> = BTreeMap::new();
    for g in Grouping::ALL {
        for ((group, model, key), s) in grouped_scores(records, g, basis)? {
            groups.entry(group).or_default().entry(model).or_default().entry(g).or_default().insert(key, s);
        }
    }
    let mut report = EvaluationReport { normalization: rule, basis, groups, improvements: Vec::new() };
    report.improvements = report.improvements()?;
    Ok(report)
}

impl EvaluationReport {
    pub fn overall(&self, group: &str, model: &str) -> Option<&ErrorScore> {
        self.groups.get(group)?.get(model)?.get(&Grouping::Overall)?.get("all")
    }

    /// Per-cluster over all-in-one for every model present in both, and the
    /// blended `c-opt` over the single-model `c-opt` within each strategy.
    pub fn improvements(&self) -> Result<Vec<ImprovementScore>, EvalError> {
        let mut out = Vec::new();
        let mut push = |kind: &str, rg: &str, rm: &str, cg: &str, cm: &str| -> Result<(), EvalError> {
            if let (Some(r), Some(c)) = (self.overall(rg, rm), self.overall(cg, cm)) {
                if r.nmae > 0.0 && r.nrmse > 0.0 {
                    out.push(ImprovementScore {
                        kind: kind.into(),
                        reference: format!("{rg}/{rm}"),
                        compared: format!("{cg}/{cm}"),
                        impa: improvement(r.nmae, c.nmae)?,
                        impr: improvement(r.nrmse, c.nrmse)?,
                    });
                }
            }
            Ok(())
        };
        for (uc, aio) in [(GROUP_UC_M3, GROUP_AIO_M3), (GROUP_UC_SAML, GROUP_AIO_SAML)] {
            if let Some(models) = self.groups.get(uc) {
                for m in models.keys() {
                    push("c/a", aio, m, uc, m)?;
                }
            }
        }
        for (m3, saml) in [(GROUP_UC_M3, GROUP_UC_SAML), (GROUP_AIO_M3, GROUP_AIO_SAML)] {
            push("m/s", saml, "c-opt", m3, "c-opt")?;
        }
        Ok(out)
    }

    /// Median overall nMAE and nRMSE across the models of `group`.
    pub fn group_median(&self, group: &str) -> Option<(f64, f64)> {
        let models = self.groups.get(group)?;
        let scores: Vec<&ErrorScore> = models.keys().filter_map(|m| self.overall(group, m)).collect();
        if scores.is_empty() {
            return None;
        }
        let a: Vec<f64> = scores.iter().map(|s| s.nmae).collect();
        let r: Vec<f64> = scores.iter().map(|s| s.nrmse).collect();
        Some((median(a), median(r)))
    }

    /// Flat CSV: `group,model,breakdown,key,nmae,nrmse,n,basis`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), EvalError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(CSV_HEADER)?;
        for (group, models) in &self.groups {
            for (model, breakdown) in models {
                for (g, keys) in breakdown {
                    for (key, s) in keys {
                        wr.write_record([
                            group.as_str(),
                            model,
                            g.name(),
                            key,
                            &s.nmae.to_string(),
                            &s.nrmse.to_string(),
                            &s.n.to_string(),
                            &s.basis.to_string(),
                        ])?;
                    }
                }
            }
        }
        wr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Rebuilds the score tables from [`Self::write_csv`] output. Improvements
    /// are recomputed; the rule is not stored in the CSV and must be supplied.
    pub fn read_csv<R: Read>(r: R, normalization: NormalizationRule) -> Result<Self, EvalError> {
        let mut rd = csv::Reader::from_reader(r);
        let mut groups: BTreeMap<String, BTreeMap<String, Breakdown>> = BTreeMap::new();
        let mut basis = None;
        for row in rd.records() {
            let row = row?;
            if row.len() != CSV_HEADER.len() {
                return Err(EvalError::BadRow(format!("{row:?}")));
            }
            let num = |i: usize| row[i].parse::<f64>().map_err(|_| EvalError::BadRow(format!("{row:?}")));
            let s = ErrorScore {
                nmae: num(4)?,
                nrmse: num(5)?,
                n: row[6].parse().map_err(|_| EvalError::BadRow(format!("{row:?}")))?,
                basis: num(7)?,
            };
            basis.get_or_insert(s.basis);
            groups
                .entry(row[0].to_string())
                .or_default()
                .entry(row[1].to_string())
                .or_default()
                .entry(row[2].parse()?)
                .or_default()
                .insert(row[3].to_string(), s);
        }
        let basis = basis.ok_or(EvalError::EmptyResults)?;
        let mut report = Self { normalization, basis, groups, improvements: Vec::new() };
        report.improvements = report.improvements()?;
        Ok(report)
    }
}

pub const CSV_HEADER: [&str; 8] = ["group", "model", "breakdown", "key", "nmae", "nrmse", "n", "basis"];

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
