//! End-to-end orchestration: split, cluster, recognize, train, forecast and
//! evaluate, plus the JSON/CSV artifacts of a run.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::clustering::{adjusted_rand_index, Method};
use crate::data::{
    attach_clear_sky, build_day_matrix, load_dataset, split_train_test, validate_records, ColumnMap, DataError,
    Dataset, DayProfile, Severity, Subset, FIRST_HOUR,
};
use crate::evaluation::{
    grouped_report, EvalError, EvaluationReport, ForecastRecord, NormalizationRule, GROUP_AIO_M3, GROUP_AIO_SAML,
    GROUP_UC_M3, GROUP_UC_SAML,
};
use crate::forecast::{
    forecast_day_as, previous_seven_am, train_cluster_models, train_early_morning, DayModel, ForecastBundle,
    ForecastError, M3Config, ModelChoice, Strategy,
};
use crate::learners::{blender_candidates, catalog, LearnerSpec, LearnerVariant};
use crate::occur::{run_occur, OccurConfig, OccurError, OccurReport};
use crate::recognition::{
    build_pr_vector, confusion_matrix, pr_metrics, train_classifier, KernelForm, PrMetrics, RecognitionError,
    SvmClassifier, SvmParams,
};
use crate::solar::{Haurwitz, Location};
use crate::synth::{synth_generate, InvalidConfig, SynthConfig};

pub const MANIFEST_VERSION: u32 = 1;
pub const OCCUR_REPORT_FILE: &str = "occur-report.json";
pub const CLASSIFIER_FILE: &str = "classifier.json";
pub const FORECASTS_FILE: &str = "forecasts.csv";
pub const EVAL_JSON_FILE: &str = "evaluation-report.json";
pub const EVAL_CSV_FILE: &str = "evaluation-report.csv";
pub const MANIFEST_FILE: &str = "run-manifest.json";
pub const BUNDLE_DIR: &str = "bundle";
pub const OUTPUT_FILES: [&str; 6] =
    [OCCUR_REPORT_FILE, CLASSIFIER_FILE, FORECASTS_FILE, EVAL_JSON_FILE, EVAL_CSV_FILE, MANIFEST_FILE];

/// Pipeline stages, each with its own seed derived from the master seed.
pub const STAGES: [&str; 6] = ["split", "occur", "svm", "early", "uc", "aio"];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: invalid field `{0}`")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("synth: {0}")]
    Synth(#[from] InvalidConfig),
    #[error("occur: {0}")]
    Occur(#[from] OccurError),
    #[error("recognition: {0}")]
    Recognition(#[from] RecognitionError),
    #[error("forecast: {0}")]
    Forecast(#[from] ForecastError),
    #[error("evaluation: {0}")]
    Evaluation(#[from] EvalError),
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for PipelineError {
    fn from(e: serde_json::Error) -> Self {
        PipelineError::Io(e.to_string())
    }
}

impl From<csv::Error> for PipelineError {
    fn from(e: csv::Error) -> Self {
        PipelineError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SynthConfig),
    Csv {
        path: PathBuf,
        #[serde(default)]
        columns: ColumnMap,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SynthConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSettings {
    pub c_grid: Vec<f64>,
    pub rho_factors: Vec<f64>,
    pub folds: usize,
    pub kernel_form: KernelForm,
}

impl Default for SvmSettings {
    fn default() -> Self {
        let p = SvmParams::default();
        Self { c_grid: p.c_grid, rho_factors: p.rho_factors, folds: p.folds, kernel_form: p.kernel_form }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataSource,
    /// Site used to fill missing clear-sky GHI.
    pub location: Option<Location>,
    pub k_max: usize,
    pub n_neighbors: usize,
    pub methods: Vec<Method>,
    pub split_ratio: f64,
    pub seed: u64,
    /// First-layer variant names, in catalog order.
    pub catalog: Vec<String>,
    /// Second-layer candidate names.
    pub blenders: Vec<String>,
    pub ann_epochs: usize,
    pub folds: usize,
    pub normalization: NormalizationRule,
    pub svm: SvmSettings,
    /// Also train the all-in-one and single-model comparison groups.
    pub compare: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            data: DataSource::default(),
            location: None,
            k_max: 14,
            n_neighbors: 10,
            methods: Method::ALL.to_vec(),
            split_ratio: 0.75,
            seed: 0,
            catalog: catalog().into_iter().map(|v| v.name).collect(),
            blenders: blender_candidates().into_iter().map(|v| v.name).collect(),
            ann_epochs: crate::learners::ANN_EPOCHS,
            folds: 10,
            normalization: NormalizationRule::MeanActual,
            svm: SvmSettings::default(),
            compare: true,
        }
    }
}

fn config_err(field: &str) -> PipelineError {
    PipelineError::Config(field.to_string())
}

/// Catalog variants by name, with the configured ANN epoch count.
pub fn resolve_catalog(names: &[String], ann_epochs: usize) -> Option<Vec<LearnerVariant>> {
    let all = catalog();
    names
        .iter()
        .map(|n| {
            let mut v = all.iter().find(|v| &v.name == n)?.clone();
            if let LearnerSpec::Ann(p) = &mut v.spec {
                p.epochs = ann_epochs;
            }
            Some(v)
        })
        .collect()
}

/// Second-layer candidates by name; `mean` is accepted as well.
pub fn resolve_blenders(names: &[String]) -> Option<Vec<LearnerVariant>> {
    let all = blender_candidates();
    names
        .iter()
        .map(|n| {
            if n == "mean" {
                return Some(LearnerVariant::new("mean", LearnerSpec::Mean));
            }
            all.iter().find(|v| &v.name == n).cloned()
        })
        .collect()
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.k_max < 2 {
            return Err(config_err("k_max"));
        }
        if self.n_neighbors == 0 {
            return Err(config_err("n_neighbors"));
        }
        if self.methods.is_empty() {
            return Err(config_err("methods"));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(config_err("split_ratio"));
        }
        if self.folds < 2 {
            return Err(config_err("folds"));
        }
        if self.ann_epochs == 0 {
            return Err(config_err("ann_epochs"));
        }
        if self.catalog.is_empty() || resolve_catalog(&self.catalog, self.ann_epochs).is_none() {
            return Err(config_err("catalog"));
        }
        if self.blenders.is_empty() || resolve_blenders(&self.blenders).is_none() {
            return Err(config_err("blenders"));
        }
        let s = &self.svm;
        if s.c_grid.is_empty() || s.c_grid.iter().any(|c| !(*c > 0.0)) {
            return Err(config_err("svm.c_grid"));
        }
        if s.rho_factors.is_empty() || s.rho_factors.iter().any(|r| !(*r > 0.0)) {
            return Err(config_err("svm.rho_factors"));
        }
        if s.folds < 2 {
            return Err(config_err("svm.folds"));
        }
        if let DataSource::Synthetic(sc) = &self.data {
            sc.validate().map_err(|e| PipelineError::Config(format!("data.{}", e.0)))?;
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn m3_config(&self, seed: u64) -> M3Config {
        M3Config {
            catalog: resolve_catalog(&self.catalog, self.ann_epochs).expect("validated catalog"),
            blenders: resolve_blenders(&self.blenders).expect("validated blenders"),
            folds: self.folds,
            seed,
        }
    }
}

pub fn load_config(path: &Path) -> Result<PipelineConfig, PipelineError> {
    let text = fs::read_to_string(path)?;
    let cfg: PipelineConfig =
        serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Seed of one stage: the first eight bytes of SHA-256(master seed, stage name).
pub fn stage_seed(master: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(stage.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("eight bytes"))
}

/// Day-recognition quality on a set of days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionSummary {
    pub classes: Vec<usize>,
    /// `confusion[recognized][actual]`.
    pub confusion: Vec<Vec<u64>>,
    pub metrics: Option<PrMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub config: PipelineConfig,
    pub n_train_days: usize,
    pub n_test_days: usize,
    pub k_opt: usize,
    pub best_method: Method,
    pub cluster_sizes: Vec<usize>,
    pub merges: Vec<crate::forecast::MergeRecord>,
    pub recognition: RecognitionSummary,
    /// Agreement of the chosen partition with the planted synthetic regimes.
    pub planted_ari: Option<f64>,
    /// Median overall `(nMAE, nRMSE)` of each group.
    pub group_medians: BTreeMap<String, (f64, f64)>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub occur_report: OccurReport,
    pub classifier: SvmClassifier,
    pub uc_bundle: ForecastBundle,
    pub aio_bundle: Option<ForecastBundle>,
    pub forecasts: Vec<ForecastRecord>,
    pub evaluation: EvaluationReport,
    pub manifest: RunManifest,
}

/// Loads or generates the dataset, fills clear-sky GHI and drops incomplete
/// days. Returns planted labels for synthetic data.
pub fn prepare_dataset(cfg: &PipelineConfig) -> Result<(Dataset, Option<BTreeMap<NaiveDate, usize>>), PipelineError> {
    let (ds, planted) = match &cfg.data {
        DataSource::Synthetic(sc) => {
            let out = synth_generate(sc)?;
            let planted = out.labels.iter().map(|l| (l.date, l.regime)).collect();
            (out.dataset, Some(planted))
        }
        DataSource::Csv { path, columns } => (load_dataset(path, columns)?, None),
    };
    for v in validate_records(&ds) {
        if v.severity == Severity::Error {
            log::warn!("{v}");
        }
    }
    let ds = attach_clear_sky(&ds, &Haurwitz, cfg.location.as_ref())?;
    let dropped = ds.incomplete_days();
    if !dropped.is_empty() {
        info!("dropping {} incomplete days", dropped.len());
    }
    Ok((ds.complete_only(), planted))
}

/// The forecast series produced for each group: `(group, model, how)`.
pub fn model_tags(bundle: &ForecastBundle, strategy: Strategy, compare: bool) -> Vec<(String, String, DayModel)> {
    let (m3, saml) = match strategy {
        Strategy::Uc => (GROUP_UC_M3, GROUP_UC_SAML),
        Strategy::Aio => (GROUP_AIO_M3, GROUP_AIO_SAML),
    };
    let learned = |c| DayModel::Learned { choice: c };
    let first = &bundle.clusters[0].model;
    let mut out = vec![(m3.to_string(), "c-opt".to_string(), learned(ModelChoice::Selected))];
    for (i, b) in first.blender_names.iter().enumerate() {
        out.push((m3.into(), format!("m3-{b}"), learned(ModelChoice::Blender(i))));
    }
    if compare {
        for (i, v) in first.variant_names.iter().enumerate() {
            out.push((saml.into(), v.clone(), learned(ModelChoice::Variant(i))));
        }
        out.push((saml.into(), "c-opt".into(), learned(ModelChoice::BestVariant)));
        if strategy == Strategy::Aio {
            out.push((saml.into(), "p".into(), DayModel::Persistence));
        }
    }
    out
}

/// Parses a model name as used in forecast tags: `c-opt`, `m3-<blender>`,
/// `best`, a first-layer variant name, or `p`.
pub fn parse_model(bundle: &ForecastBundle, name: &str) -> Option<DayModel> {
    let first = &bundle.clusters.first()?.model;
    let learned = |c| Some(DayModel::Learned { choice: c });
    match name {
        "c-opt" => learned(ModelChoice::Selected),
        "best" => learned(ModelChoice::BestVariant),
        "p" => Some(DayModel::Persistence),
        _ => {
            if let Some(b) = name.strip_prefix("m3-") {
                if let Some(i) = first.blender_names.iter().position(|x| x == b) {
                    return learned(ModelChoice::Blender(i));
                }
            }
            first.variant_names.iter().position(|x| x == name).and_then(|i| learned(ModelChoice::Variant(i)))
        }
    }
}

/// 1DA persistence input for `day`: the previous day's 7am, or clear sky
/// (index 1) for the first day of the data.
pub fn seven_am_input(ds: &Dataset, day: &DayProfile) -> Result<(f64, f64), ForecastError> {
    match ds.previous_day(day.date) {
        Some(prev) => previous_seven_am(prev),
        None => {
            let clr = day
                .record(FIRST_HOUR)
                .and_then(|r| r.ghi_clr)
                .ok_or(ForecastError::MissingHour(day.date, FIRST_HOUR))?;
            Ok((clr, clr))
        }
    }
}

/// Forecasts every day in `days` with every `(group, model, how)` entry.
/// Rows come out in day order, then entry order, then hour.
pub fn forecast_days(
    ds: &Dataset,
    days: &[&DayProfile],
    recognized: &[usize],
    runs: &[(&ForecastBundle, Vec<(String, String, DayModel)>)],
) -> Result<Vec<ForecastRecord>, PipelineError> {
    let per_day: Vec<Result<Vec<ForecastRecord>, ForecastError>> = days
        .par_iter()
        .zip(recognized)
        .map(|(day, &cluster)| {
            let prev = seven_am_input(ds, day)?;
            let mut rows = Vec::new();
            for (bundle, tags) in runs {
                for (group, model, how) in tags {
                    let f = forecast_day_as(bundle, day, Some(prev), *how, cluster)?;
                    for (i, r) in day.records.iter().enumerate() {
                        rows.push(ForecastRecord {
                            date: day.date,
                            hour: r.hour(),
                            actual: r.ghi,
                            forecast: f.ghi[i],
                            group: group.clone(),
                            model: model.clone(),
                            cluster,
                        });
                    }
                }
            }
            Ok(rows)
        })
        .collect();
    let mut out = Vec::new();
    for r in per_day {
        out.extend(r?);
    }
    Ok(out)
}

fn nearest(centroids: &[Vec<f64>], v: &[f64]) -> usize {
    let d = |c: &Vec<f64>| c.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    (0..centroids.len()).min_by(|&a, &b| d(&centroids[a]).total_cmp(&d(&centroids[b])).then(a.cmp(&b))).unwrap_or(0)
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunArtifacts, PipelineError> {
    cfg.validate()?;
    let seeds: BTreeMap<String, u64> = STAGES.iter().map(|s| (s.to_string(), stage_seed(cfg.seed, s))).collect();
    for (s, v) in &seeds {
        info!("stage {s}: seed {v}");
    }

    let (ds, planted) = prepare_dataset(cfg)?;
    let ds = split_train_test(&ds, cfg.split_ratio, seeds["split"])?;
    let train = build_day_matrix(&ds, Subset::Train)?;
    let train_days = ds.subset(Subset::Train);
    let test_days = ds.subset(Subset::Test);
    info!("split: {} train days, {} test days", train_days.len(), test_days.len());

    let occur_cfg = OccurConfig {
        k_max: cfg.k_max,
        n_neighbors: cfg.n_neighbors,
        seed: seeds["occur"],
        methods: cfg.methods.clone(),
        ..OccurConfig::default()
    };
    let outcome = run_occur(&train.values, &occur_cfg)?;
    let labels = outcome.best_partition.labels.clone();
    let k_opt = outcome.k_opt;
    info!("occur: k_opt = {k_opt} by {}", outcome.best_method);
    let occur_report = OccurReport::new(&outcome, &train.dates);
    let planted_ari = planted.as_ref().map(|p| {
        let truth: Vec<usize> = train.dates.iter().map(|d| p[d]).collect();
        adjusted_rand_index(&truth, &labels)
    });

    let vectors = train_days.iter().map(|d| build_pr_vector(d)).collect::<Result<Vec<_>, _>>()?;
    let svm_params = SvmParams {
        c_grid: cfg.svm.c_grid.clone(),
        rho_factors: cfg.svm.rho_factors.clone(),
        folds: cfg.svm.folds,
        kernel_form: cfg.svm.kernel_form,
        seed: seeds["svm"],
        ..SvmParams::default()
    };
    let classifier = train_classifier(&vectors, &labels, &svm_params)?;
    info!("svm: C = {}, rho = {}", classifier.c, classifier.rho);

    let early = train_early_morning(&train_days, &cfg.m3_config(seeds["early"]))?;
    let uc_bundle = train_cluster_models(&train_days, &labels, k_opt, Strategy::Uc, &cfg.m3_config(seeds["uc"]), early.clone())?;
    let aio_bundle = if cfg.compare {
        let zeros = vec![0; train_days.len()];
        Some(train_cluster_models(&train_days, &zeros, 1, Strategy::Aio, &cfg.m3_config(seeds["aio"]), early)?)
    } else {
        None
    };

    let test_vectors = test_days.iter().map(|d| build_pr_vector(d)).collect::<Result<Vec<_>, _>>()?;
    let recognized = test_vectors.iter().map(|v| classifier.predict(v)).collect::<Result<Vec<_>, _>>()?;
    let centroids = outcome.best_partition.cluster_means(&train.values);
    let actual: Vec<usize> = test_days
        .iter()
        .map(|d| d.ghi_vector().map(|g| nearest(&centroids, &g)).ok_or(DataError::IncompleteDay(d.date)))
        .collect::<Result<_, _>>()?;
    let confusion = confusion_matrix(&classifier.classes, &recognized, &actual);
    let recognition = RecognitionSummary {
        classes: classifier.classes.clone(),
        metrics: pr_metrics(&confusion).ok(),
        confusion,
    };
    if let Some(m) = &recognition.metrics {
        info!("recognition accuracy on test days: {:.3}", m.accuracy);
    }

    let mut runs = vec![(&uc_bundle, model_tags(&uc_bundle, Strategy::Uc, cfg.compare))];
    if let Some(aio) = &aio_bundle {
        runs.push((aio, model_tags(aio, Strategy::Aio, true)));
    }
    let forecasts = forecast_days(&ds, &test_days, &recognized, &runs)?;
    let evaluation = grouped_report(&forecasts, cfg.normalization)?;
    let group_medians =
        evaluation.groups.keys().filter_map(|g| evaluation.group_median(g).map(|m| (g.clone(), m))).collect();

    let manifest = RunManifest {
        version: MANIFEST_VERSION,
        config_hash: cfg.hash(),
        seeds,
        config: cfg.clone(),
        n_train_days: train_days.len(),
        n_test_days: test_days.len(),
        k_opt,
        best_method: outcome.best_method,
        cluster_sizes: outcome.best_partition.sizes(),
        merges: uc_bundle.merges.clone(),
        recognition,
        planted_ari,
        group_medians,
        files: OUTPUT_FILES.iter().map(|s| s.to_string()).collect(),
    };
    Ok(RunArtifacts { occur_report, classifier, uc_bundle, aio_bundle, forecasts, evaluation, manifest })
}

pub const FORECAST_HEADER: [&str; 6] =
    ["date", "hour", "ghi_actual", "ghi_forecast", "model_tag", "recognized_cluster"];

pub fn write_forecasts<W: Write>(rows: &[ForecastRecord], w: W) -> Result<(), PipelineError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(FORECAST_HEADER)?;
    for r in rows {
        wr.write_record([
            r.date.to_string(),
            r.hour.to_string(),
            r.actual.to_string(),
            r.forecast.to_string(),
            format!("{}/{}", r.group, r.model),
            r.cluster.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_forecasts<R: Read>(r: R) -> Result<Vec<ForecastRecord>, PipelineError> {
    let mut rd = csv::Reader::from_reader(r);
    let bad = |line: usize, what: &str| PipelineError::Io(format!("forecasts line {line}: bad {what}"));
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row?;
        let line = i + 2;
        if row.len() != FORECAST_HEADER.len() {
            return Err(bad(line, "row width"));
        }
        let (group, model) = row[4].split_once('/').ok_or_else(|| bad(line, "model_tag"))?;
        out.push(ForecastRecord {
            date: row[0].parse().map_err(|_| bad(line, "date"))?,
            hour: row[1].parse().map_err(|_| bad(line, "hour"))?,
            actual: row[2].parse().map_err(|_| bad(line, "ghi_actual"))?,
            forecast: row[3].parse().map_err(|_| bad(line, "ghi_forecast"))?,
            group: group.into(),
            model: model.into(),
            cluster: row[5].parse().map_err(|_| bad(line, "recognized_cluster"))?,
        });
    }
    Ok(out)
}

/// Fails with `IoError("exists")` when `dir` holds files and `force` is off.
pub fn prepare_out_dir(dir: &Path, force: bool) -> Result<(), PipelineError> {
    if dir.exists() {
        let occupied = fs::read_dir(dir)?.next().is_some();
        if occupied && !force {
            return Err(PipelineError::Io("exists".into()));
        }
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), PipelineError> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

/// Writes every artifact of a run into `dir`.
pub fn emit_outputs(art: &RunArtifacts, dir: &Path, force: bool) -> Result<(), PipelineError> {
    prepare_out_dir(dir, force)?;
    write_json(&dir.join(OCCUR_REPORT_FILE), &art.occur_report)?;
    write_json(&dir.join(CLASSIFIER_FILE), &art.classifier)?;
    write_forecasts(&art.forecasts, fs::File::create(dir.join(FORECASTS_FILE))?)?;
    write_json(&dir.join(EVAL_JSON_FILE), &art.evaluation)?;
    art.evaluation.write_csv(fs::File::create(dir.join(EVAL_CSV_FILE))?)?;
    let bundle_dir = dir.join(BUNDLE_DIR);
    if bundle_dir.exists() {
        fs::remove_dir_all(&bundle_dir)?;
    }
    art.uc_bundle.save_dir(&bundle_dir.join(Strategy::Uc.tag()))?;
    if let Some(aio) = &art.aio_bundle {
        aio.save_dir(&bundle_dir.join(Strategy::Aio.tag()))?;
    }
    write_json(&dir.join(MANIFEST_FILE), &art.manifest)?;
    Ok(())
}
