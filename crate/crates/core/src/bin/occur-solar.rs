use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use occur_solar::data::{attach_clear_sky, load_dataset, write_dataset, ColumnMap, Dataset};
use occur_solar::evaluation::{grouped_report, NormalizationRule};
use occur_solar::forecast::{train_cluster_models, train_early_morning, ForecastBundle, Strategy};
use occur_solar::occur::{run_occur, OccurConfig, OccurReport};
use occur_solar::pipeline::{
    emit_outputs, forecast_days, load_config, parse_model, prepare_out_dir, read_forecasts, run_pipeline,
    stage_seed, write_forecasts, PipelineConfig, PipelineError, BUNDLE_DIR, CLASSIFIER_FILE, EVAL_CSV_FILE,
    EVAL_JSON_FILE,
};
use occur_solar::recognition::{build_pr_vector, train_classifier, SvmClassifier, SvmParams};
use occur_solar::solar::{Haurwitz, Location};
use occur_solar::synth::{synth_generate, write_labels, SynthConfig};

#[derive(Parser)]
#[command(name = "occur-solar", version, about = "Cluster-based hourly solar irradiance forecasting")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every stage from a JSON config and write all artifacts.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Generate synthetic hourly data plus planted regime labels.
    Synth {
        /// JSON synthetic-data config; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        days: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Cluster the daily GHI profiles of a data file and vote on K.
    Cluster {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 14)]
        k_max: usize,
        #[arg(long, default_value_t = 10)]
        neighbors: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        site: Site,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recognize each day's cluster from its first four hours.
    Recognize {
        #[arg(long)]
        classifier: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        site: Site,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the classifier and forecasting models on clustered days.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// `occur-report.json` whose labels mark the training days.
        #[arg(long)]
        clusters: PathBuf,
        /// Pipeline config for learner, blender, fold and seed settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        site: Site,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Forecast hours 7 to 19 of every day in a data file.
    Forecast {
        /// Directory written by `train` or `pipeline`.
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = ["uc", "aio"], default_value = "uc")]
        strategy: String,
        /// Comma-separated model names: c-opt, m3-<blender>, best, a variant name, or p.
        #[arg(long, default_value = "c-opt")]
        model: String,
        #[command(flatten)]
        site: Site,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a forecasts CSV by group, model, month, hour and cluster.
    Evaluate {
        #[arg(long)]
        forecasts: PathBuf,
        #[arg(long, default_value = "mean_actual")]
        normalization: NormalizationRule,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

/// Site for filling missing clear-sky GHI.
#[derive(clap::Args)]
struct Site {
    #[arg(long, requires = "lon")]
    lat: Option<f64>,
    #[arg(long, requires = "lat", allow_hyphen_values = true)]
    lon: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    elevation: f64,
}

impl Site {
    fn location(&self) -> Option<Location> {
        Some(Location::new(self.lat?, self.lon?, self.elevation))
    }
}

fn load(path: &Path, site: &Site) -> Result<Dataset, PipelineError> {
    let ds = load_dataset(path, &ColumnMap::default())?;
    Ok(attach_clear_sky(&ds, &Haurwitz, site.location().as_ref())?.complete_only())
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<(), PipelineError> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let bytes = fs::read(path).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn run(cmd: Cmd) -> Result<(), (&'static str, PipelineError)> {
    match cmd {
        Cmd::Pipeline { config, out, force } => {
            let cfg = load_config(&config).map_err(|e| ("config", e))?;
            let art = run_pipeline(&cfg).map_err(|e| ("pipeline", e))?;
            emit_outputs(&art, &out, force).map_err(|e| ("emit", e))?;
            println!("k_opt = {}; artifacts in {}", art.manifest.k_opt, out.display());
            Ok(())
        }
        Cmd::Synth { config, days, seed, out, force } => (|| {
            let mut cfg: SynthConfig = match config {
                Some(p) => read_json(&p)?,
                None => SynthConfig::default(),
            };
            cfg.n_days = days.unwrap_or(cfg.n_days);
            cfg.seed = seed.unwrap_or(cfg.seed);
            let data = synth_generate(&cfg)?;
            prepare_out_dir(&out, force)?;
            write_dataset(&data.dataset, fs::File::create(out.join("data.csv"))?)?;
            write_labels(&data.labels, fs::File::create(out.join("labels.csv"))?)?;
            println!("{} days written to {}", data.dataset.len(), out.display());
            Ok(())
        })()
        .map_err(|e| ("synth", e)),
        Cmd::Cluster { data, k_max, neighbors, seed, site, out } => (|| {
            let ds = load(&data, &site)?;
            let m = occur_solar::data::build_day_matrix(&ds, occur_solar::data::Subset::All)?;
            let cfg = OccurConfig { k_max, n_neighbors: neighbors, seed, ..OccurConfig::default() };
            let outcome = run_occur(&m.values, &cfg)?;
            write_json(&out, &OccurReport::new(&outcome, &m.dates))?;
            println!("k_opt = {} by {}", outcome.k_opt, outcome.best_method);
            Ok(())
        })()
        .map_err(|e| ("cluster", e)),
        Cmd::Recognize { classifier, data, site, out } => (|| {
            let clf: SvmClassifier = read_json(&classifier)?;
            let ds = load(&data, &site)?;
            let mut s = String::from("date,recognized_cluster\n");
            for d in &ds.days {
                let label = clf.predict(&build_pr_vector(d)?)?;
                s.push_str(&format!("{},{label}\n", d.date));
            }
            match out {
                Some(p) => fs::write(p, s)?,
                None => print!("{s}"),
            }
            Ok(())
        })()
        .map_err(|e| ("recognize", e)),
        Cmd::Train { data, clusters, config, site, out, force } => (|| {
            let cfg = match config {
                Some(p) => load_config(&p)?,
                None => PipelineConfig::default(),
            };
            cfg.validate()?;
            let report: OccurReport = read_json(&clusters)?;
            let ds = load(&data, &site)?;
            let labels: BTreeMap<_, _> = report.labels.iter().map(|l| (l.date, l.cluster)).collect();
            let days: Vec<_> = ds.days.iter().filter(|d| labels.contains_key(&d.date)).collect();
            let y: Vec<usize> = days.iter().map(|d| labels[&d.date]).collect();
            if days.is_empty() {
                return Err(PipelineError::Io("no labeled days in data".into()));
            }
            let vectors = days.iter().map(|d| build_pr_vector(d)).collect::<Result<Vec<_>, _>>()?;
            let params = SvmParams {
                c_grid: cfg.svm.c_grid.clone(),
                rho_factors: cfg.svm.rho_factors.clone(),
                folds: cfg.svm.folds,
                kernel_form: cfg.svm.kernel_form,
                seed: stage_seed(cfg.seed, "svm"),
                ..SvmParams::default()
            };
            let clf = train_classifier(&vectors, &y, &params)?;
            let early = train_early_morning(&days, &cfg.m3_config(stage_seed(cfg.seed, "early")))?;
            let k = report.k_opt;
            let uc = train_cluster_models(&days, &y, k, Strategy::Uc, &cfg.m3_config(stage_seed(cfg.seed, "uc")), early.clone())?;
            prepare_out_dir(&out, force)?;
            write_json(&out.join(CLASSIFIER_FILE), &clf)?;
            uc.save_dir(&out.join(BUNDLE_DIR).join("uc"))?;
            if cfg.compare {
                let zeros = vec![0; days.len()];
                let aio = train_cluster_models(&days, &zeros, 1, Strategy::Aio, &cfg.m3_config(stage_seed(cfg.seed, "aio")), early)?;
                aio.save_dir(&out.join(BUNDLE_DIR).join("aio"))?;
            }
            println!("trained on {} days; models in {}", days.len(), out.display());
            Ok(())
        })()
        .map_err(|e| ("train", e)),
        Cmd::Forecast { models, data, strategy, model, site, out } => (|| {
            let clf: SvmClassifier = read_json(&models.join(CLASSIFIER_FILE))?;
            let bundle = ForecastBundle::load_dir(&models.join(BUNDLE_DIR).join(&strategy))?;
            let ds = load(&data, &site)?;
            let mut tags = Vec::new();
            for name in model.split(',').map(str::trim) {
                let how = parse_model(&bundle, name)
                    .ok_or_else(|| PipelineError::Config(format!("model `{name}`")))?;
                tags.push((strategy.clone(), name.to_string(), how));
            }
            let days: Vec<_> = ds.days.iter().collect();
            let recognized = days
                .iter()
                .map(|d| Ok(clf.predict(&build_pr_vector(d)?)?))
                .collect::<Result<Vec<_>, PipelineError>>()?;
            let rows = forecast_days(&ds, &days, &recognized, &[(&bundle, tags)])?;
            write_forecasts(&rows, fs::File::create(&out)?)?;
            println!("{} forecasts written to {}", rows.len(), out.display());
            Ok(())
        })()
        .map_err(|e| ("forecast", e)),
        Cmd::Evaluate { forecasts, normalization, out, force } => (|| {
            let rows = read_forecasts(fs::File::open(&forecasts)?)?;
            let report = grouped_report(&rows, normalization)?;
            prepare_out_dir(&out, force)?;
            write_json(&out.join(EVAL_JSON_FILE), &report)?;
            report.write_csv(fs::File::create(out.join(EVAL_CSV_FILE))?)?;
            for (g, models) in &report.groups {
                for m in models.keys() {
                    if let Some(s) = report.overall(g, m) {
                        println!("{g}/{m}: nMAE {:.2}%  nRMSE {:.2}%", s.nmae, s.nrmse);
                    }
                }
            }
            Ok(())
        })()
        .map_err(|e| ("evaluate", e)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err((stage, e)) => {
            eprintln!("error [{stage}]: {e}");
            ExitCode::FAILURE
        }
    }
}
