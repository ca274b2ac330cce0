//! Hourly solar records, daily profiles and the train/test split.
//!
//! A [`Dataset`] is a chronologically ordered list of [`DayProfile`]s, each
//! holding the hourly records of one calendar day restricted to the daytime
//! window 07:00–19:00 (13 hours). The daily GHI vectors of complete days form
//! the clustering universe.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::clear_sky_index;
use crate::solar::{ClearSkyModel, Location};

/// First hour of the daytime window.
pub const FIRST_HOUR: u32 = 7;
/// Last hour of the daytime window (inclusive).
pub const LAST_HOUR: u32 = 19;
/// Number of hourly values per day.
pub const HOURS_PER_DAY: usize = (LAST_HOUR - FIRST_HOUR + 1) as usize;
/// Number of per-hour features.
pub const N_FEATURES: usize = 13;

/// Feature order used everywhere a per-hour feature vector is built.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "ghi",
    "ghi_clr",
    "csi",
    "img_mu",
    "img_sigma",
    "img_entropy",
    "dni",
    "dhi",
    "temp",
    "rh",
    "pres",
    "ws",
    "wd",
];

/// CSV header written by [`write_dataset`].
pub const CSV_COLUMNS: [&str; 14] = [
    "timestamp",
    "ghi",
    "ghi_clr",
    "dni",
    "dhi",
    "temp",
    "rh",
    "pres",
    "ws",
    "wd",
    "img_mu",
    "img_sigma",
    "img_entropy",
    "image_path",
];

const REQUIRED_COLUMNS: [&str; 9] = [
    "timestamp", "ghi", "dni", "dhi", "temp", "rh", "pres", "ws", "wd",
];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("unparseable row at line {line}: {reason}")]
    UnparseableRow { line: usize, reason: String },
    #[error("empty file")]
    EmptyFile,
    #[error("duplicate record for {0}")]
    DuplicateRecord(NaiveDateTime),
    #[error("month {0} has fewer than 2 days")]
    MonthTooSmall(String),
    #[error("split ratio {0} outside (0, 1)")]
    BadRatio(f64),
    #[error("day {0} is incomplete")]
    IncompleteDay(NaiveDate),
    #[error("no location configured for clear-sky computation")]
    NoLocationConfigured,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One hourly observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourRecord {
    pub timestamp: NaiveDateTime,
    pub ghi: f64,
    pub ghi_clr: Option<f64>,
    pub dni: f64,
    pub dhi: f64,
    pub temp: f64,
    pub rh: f64,
    pub pres: f64,
    pub ws: f64,
    pub wd: f64,
    pub img_mu: Option<f64>,
    pub img_sigma: Option<f64>,
    pub img_entropy: Option<f64>,
    pub image_path: Option<String>,
}

impl HourRecord {
    pub fn hour(&self) -> u32 {
        self.timestamp.hour()
    }

    pub fn date(&self) -> NaiveDate {
        self.timestamp.date()
    }

    /// Clear-sky index of this hour; zero when clear-sky GHI is zero or absent.
    pub fn csi(&self) -> f64 {
        clear_sky_index(self.ghi, self.ghi_clr.unwrap_or(0.0))
    }

    /// The 13-feature vector in [`FEATURE_NAMES`] order.
    ///
    /// Returns the name of the first missing optional feature on failure.
    pub fn feature_vector(&self) -> Result<[f64; N_FEATURES], &'static str> {
        let clr = self.ghi_clr.ok_or("ghi_clr")?;
        let mu = self.img_mu.ok_or("img_mu")?;
        let sigma = self.img_sigma.ok_or("img_sigma")?;
        let entropy = self.img_entropy.ok_or("img_entropy")?;
        Ok([
            self.ghi,
            clr,
            clear_sky_index(self.ghi, clr),
            mu,
            sigma,
            entropy,
            self.dni,
            self.dhi,
            self.temp,
            self.rh,
            self.pres,
            self.ws,
            self.wd,
        ])
    }
}

/// All records of one calendar day inside the daytime window, ordered by hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayProfile {
    pub date: NaiveDate,
    pub records: Vec<HourRecord>,
}

impl DayProfile {
    pub fn new(date: NaiveDate, mut records: Vec<HourRecord>) -> Self {
        records.sort_by_key(|r| r.hour());
        Self { date, records }
    }

    pub fn is_complete(&self) -> bool {
        self.records.len() == HOURS_PER_DAY
            && self
                .records
                .iter()
                .zip(FIRST_HOUR..=LAST_HOUR)
                .all(|(r, h)| r.hour() == h)
    }

    pub fn missing_hours(&self) -> Vec<u32> {
        (FIRST_HOUR..=LAST_HOUR)
            .filter(|h| self.record(*h).is_none())
            .collect()
    }

    pub fn record(&self, hour: u32) -> Option<&HourRecord> {
        self.records.iter().find(|r| r.hour() == hour)
    }

    /// The 13 ordered hourly GHI values, or `None` for an incomplete day.
    pub fn ghi_vector(&self) -> Option<[f64; HOURS_PER_DAY]> {
        if !self.is_complete() {
            return None;
        }
        let mut out = [0.0; HOURS_PER_DAY];
        for (o, r) in out.iter_mut().zip(&self.records) {
            *o = r.ghi;
        }
        Some(out)
    }

    pub fn month_key(&self) -> (i32, u32) {
        (self.date.year(), self.date.month())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Unassigned,
    Train,
    Test,
}

/// Which days to select from a tagged dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subset {
    Train,
    Test,
    All,
}

impl Subset {
    fn admits(self, tag: SplitTag) -> bool {
        match self {
            Subset::All => true,
            Subset::Train => tag == SplitTag::Train,
            Subset::Test => tag == SplitTag::Test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub days: Vec<DayProfile>,
    pub tags: Vec<SplitTag>,
}

impl Dataset {
    /// Builds a dataset from day profiles, sorting them chronologically.
    pub fn from_days(mut days: Vec<DayProfile>) -> Self {
        days.sort_by_key(|d| d.date);
        let tags = vec![SplitTag::Unassigned; days.len()];
        Self { days, tags }
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn n_records(&self) -> usize {
        self.days.iter().map(|d| d.records.len()).sum()
    }

    /// Days with at least one missing hour.
    pub fn incomplete_days(&self) -> Vec<NaiveDate> {
        self.days
            .iter()
            .filter(|d| !d.is_complete())
            .map(|d| d.date)
            .collect()
    }

    /// Copy of the dataset without incomplete days (tags are kept).
    pub fn complete_only(&self) -> Dataset {
        let (days, tags) = self
            .days
            .iter()
            .zip(&self.tags)
            .filter(|(d, _)| d.is_complete())
            .map(|(d, t)| (d.clone(), *t))
            .unzip();
        Dataset { days, tags }
    }

    /// Indices of days belonging to `subset`, in chronological order.
    pub fn indices(&self, subset: Subset) -> Vec<usize> {
        self.tags
            .iter()
            .enumerate()
            .filter(|(_, t)| subset.admits(**t))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn subset(&self, subset: Subset) -> Vec<&DayProfile> {
        self.indices(subset).into_iter().map(|i| &self.days[i]).collect()
    }

    pub fn day(&self, date: NaiveDate) -> Option<&DayProfile> {
        self.days
            .binary_search_by_key(&date, |d| d.date)
            .ok()
            .map(|i| &self.days[i])
    }

    /// The latest day strictly before `date`.
    pub fn previous_day(&self, date: NaiveDate) -> Option<&DayProfile> {
        let idx = self.days.partition_point(|d| d.date < date);
        idx.checked_sub(1).map(|i| &self.days[i])
    }
}

/// Maps canonical column names onto the header names of an input file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    #[serde(default)]
    pub renames: BTreeMap<String, String>,
}

impl ColumnMap {
    fn header_for<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.renames
            .get(canonical)
            .map(String::as_str)
            .unwrap_or(canonical)
    }
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    const FORMATS: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%d %H:%M",
    ];
    let s = s.trim();
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// Reads an hourly CSV file. See [`read_dataset`].
pub fn load_dataset(path: impl AsRef<Path>, schema: &ColumnMap) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path)?;
    read_dataset(file, schema)
}

/// Parses hourly CSV rows and groups them into days.
///
/// Rows outside the 07:00–19:00 window are skipped. Days with missing hours
/// are kept (see [`Dataset::incomplete_days`]) so callers can report them.
pub fn read_dataset<R: Read>(reader: R, schema: &ColumnMap) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) if !h.is_empty() && !(h.len() == 1 && h[0].is_empty()) => h.clone(),
        Ok(_) => return Err(DataError::EmptyFile),
        Err(e) => return Err(e.into()),
    };
    let position = |name: &str| headers.iter().position(|h| h == schema.header_for(name));
    let mut required = HashMap::new();
    for name in REQUIRED_COLUMNS {
        let idx = position(name).ok_or_else(|| DataError::MissingColumn(name.to_string()))?;
        required.insert(name, idx);
    }
    let optional: HashMap<&str, Option<usize>> = ["ghi_clr", "img_mu", "img_sigma", "img_entropy", "image_path"]
        .into_iter()
        .map(|n| (n, position(n)))
        .collect();

    let mut by_date: BTreeMap<NaiveDate, Vec<HourRecord>> = BTreeMap::new();
    let mut seen = std::collections::HashSet::new();
    let mut n_rows = 0usize;
    for (i, row) in rdr.records().enumerate() {
        // header is line 1
        let line = i + 2;
        let row = row.map_err(|e| DataError::UnparseableRow { line, reason: e.to_string() })?;
        n_rows += 1;
        let bad = |reason: String| DataError::UnparseableRow { line, reason };
        let num = |name: &str| -> Result<f64, DataError> {
            let raw = row.get(required[name]).unwrap_or("");
            raw.parse::<f64>()
                .map_err(|_| bad(format!("`{name}` = {raw:?} is not a number")))
        };
        let opt_num = |name: &str| -> Result<Option<f64>, DataError> {
            match optional[name].and_then(|idx| row.get(idx)) {
                None => Ok(None),
                Some(raw) if raw.is_empty() || raw.eq_ignore_ascii_case("nan") => Ok(None),
                Some(raw) => raw
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| bad(format!("`{name}` = {raw:?} is not a number"))),
            }
        };
        let ts_raw = row.get(required["timestamp"]).unwrap_or("");
        let timestamp =
            parse_timestamp(ts_raw).ok_or_else(|| bad(format!("bad timestamp {ts_raw:?}")))?;
        let record = HourRecord {
            timestamp,
            ghi: num("ghi")?,
            ghi_clr: opt_num("ghi_clr")?,
            dni: num("dni")?,
            dhi: num("dhi")?,
            temp: num("temp")?,
            rh: num("rh")?,
            pres: num("pres")?,
            ws: num("ws")?,
            wd: num("wd")?,
            img_mu: opt_num("img_mu")?,
            img_sigma: opt_num("img_sigma")?,
            img_entropy: opt_num("img_entropy")?,
            image_path: optional["image_path"]
                .and_then(|idx| row.get(idx))
                .filter(|s| !s.is_empty())
                .map(str::to_string),
        };
        if !(FIRST_HOUR..=LAST_HOUR).contains(&record.hour()) {
            continue;
        }
        if !seen.insert(timestamp) {
            return Err(DataError::DuplicateRecord(timestamp));
        }
        by_date.entry(record.date()).or_default().push(record);
    }
    if n_rows == 0 {
        return Err(DataError::EmptyFile);
    }
    let days = by_date
        .into_iter()
        .map(|(date, recs)| DayProfile::new(date, recs))
        .collect();
    Ok(Dataset::from_days(days))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the dataset in the canonical CSV layout (all 14 columns).
pub fn write_dataset<W: Write>(ds: &Dataset, writer: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_COLUMNS)?;
    for r in ds.days.iter().flat_map(|d| &d.records) {
        w.write_record([
            r.timestamp.format("%Y-%m-%dT%H:%M:%S").to_string(),
            r.ghi.to_string(),
            fmt_opt(r.ghi_clr),
            r.dni.to_string(),
            r.dhi.to_string(),
            r.temp.to_string(),
            r.rh.to_string(),
            r.pres.to_string(),
            r.ws.to_string(),
            r.wd.to_string(),
            fmt_opt(r.img_mu),
            fmt_opt(r.img_sigma),
            fmt_opt(r.img_entropy),
            r.image_path.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub date: NaiveDate,
    /// `None` for day-level findings such as missing hours.
    pub hour: Option<u32>,
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hour {
            Some(h) => write!(f, "{} {:02}:00 {:?}: {}", self.date, h, self.severity, self.message),
            None => write!(f, "{} {:?}: {}", self.date, self.severity, self.message),
        }
    }
}

/// Lists every invariant violation; an empty report means the data is clean.
pub fn validate_records(ds: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    for day in &ds.days {
        let missing = day.missing_hours();
        if !missing.is_empty() {
            out.push(Violation {
                date: day.date,
                hour: None,
                severity: Severity::Error,
                message: format!("missing hours {missing:?}"),
            });
        }
        for r in &day.records {
            let mut push = |severity, message: &str| {
                out.push(Violation {
                    date: day.date,
                    hour: Some(r.hour()),
                    severity,
                    message: message.to_string(),
                })
            };
            let non_negative = [
                (r.ghi, "ghi negative"),
                (r.dni, "dni negative"),
                (r.dhi, "dhi negative"),
                (r.ws, "ws negative"),
            ];
            for (v, msg) in non_negative {
                if v < 0.0 || !v.is_finite() {
                    push(Severity::Error, msg);
                }
            }
            if let Some(clr) = r.ghi_clr {
                if clr < 0.0 {
                    push(Severity::Error, "ghi_clr negative");
                } else if r.ghi > 1.05 * clr && r.ghi > 0.0 {
                    push(Severity::Warning, "ghi exceeds 1.05 x ghi_clr");
                }
            }
            if !(0.0..=100.0).contains(&r.rh) {
                push(Severity::Error, "rh out of range");
            }
            if r.pres <= 0.0 {
                push(Severity::Error, "pres not positive");
            }
            if !(0.0..360.0).contains(&r.wd) {
                push(Severity::Error, "wd out of range");
            }
        }
    }
    out
}

/// Number of training days for a month of `n` days: round-half-up of `ratio * n`.
pub fn train_count(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64 + 0.5).floor() as usize).min(n)
}

/// Tags days as train/test, month by month, with a seeded shuffle.
pub fn split_train_test(ds: &Dataset, ratio: f64, seed: u64) -> Result<Dataset, DataError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DataError::BadRatio(ratio));
    }
    let mut months: BTreeMap<(i32, u32), Vec<usize>> = BTreeMap::new();
    for (i, d) in ds.days.iter().enumerate() {
        months.entry(d.month_key()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tags = vec![SplitTag::Test; ds.days.len()];
    for ((year, month), mut idx) in months {
        if idx.len() < 2 {
            return Err(DataError::MonthTooSmall(format!("{year:04}-{month:02}")));
        }
        idx.shuffle(&mut rng);
        let n_train = train_count(idx.len(), ratio);
        for &i in &idx[..n_train] {
            tags[i] = SplitTag::Train;
        }
    }
    Ok(Dataset { days: ds.days.clone(), tags })
}

/// Daily GHI matrix of the selected days.
#[derive(Debug, Clone, PartialEq)]
pub struct DayMatrix {
    pub dates: Vec<NaiveDate>,
    /// Indices into the source dataset.
    pub day_indices: Vec<usize>,
    pub values: Array2<f64>,
}

/// Stacks the 13-hour GHI vectors of the selected days, chronologically.
pub fn build_day_matrix(ds: &Dataset, subset: Subset) -> Result<DayMatrix, DataError> {
    let idx = ds.indices(subset);
    let mut values = Array2::zeros((idx.len(), HOURS_PER_DAY));
    let mut dates = Vec::with_capacity(idx.len());
    for (row, &i) in idx.iter().enumerate() {
        let day = &ds.days[i];
        let v = day.ghi_vector().ok_or(DataError::IncompleteDay(day.date))?;
        for (c, x) in v.iter().enumerate() {
            values[[row, c]] = *x;
        }
        dates.push(day.date);
    }
    Ok(DayMatrix { dates, day_indices: idx, values })
}

/// Fills missing `ghi_clr` values from `model`; present values pass through.
pub fn attach_clear_sky(
    ds: &Dataset,
    model: &dyn ClearSkyModel,
    location: Option<&Location>,
) -> Result<Dataset, DataError> {
    let mut out = ds.clone();
    for rec in out.days.iter_mut().flat_map(|d| d.records.iter_mut()) {
        if rec.ghi_clr.is_none() {
            let loc = location.ok_or(DataError::NoLocationConfigured)?;
            rec.ghi_clr = Some(model.ghi_clear(rec.timestamp, loc));
        }
    }
    Ok(out)
}
