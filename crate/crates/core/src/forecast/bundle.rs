use std::fs;
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use super::{one_hour_training_set, train_m3, ForecastError, M3Config, M3Model};
use crate::data::{DayProfile, HOURS_PER_DAY};

pub const BUNDLE_VERSION: u32 = 1;

/// Whether cluster models are trained per cluster or on all days at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Uc,
    Aio,
}

impl Strategy {
    pub fn tag(self) -> &'static str {
        match self {
            Strategy::Uc => "uc",
            Strategy::Aio => "aio",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub from: usize,
    pub into: usize,
    pub days: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    /// Original cluster labels served by this model.
    pub labels: Vec<usize>,
    pub n_days: usize,
    pub blender: String,
    pub model: M3Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastBundle {
    pub version: u32,
    pub strategy: Strategy,
    /// `label_map[label]` is the index of the model serving that label.
    pub label_map: Vec<usize>,
    pub clusters: Vec<ClusterModel>,
    pub merges: Vec<MergeRecord>,
    /// Models for 8am, 9am and 10am.
    pub early: Vec<M3Model>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    strategy: Strategy,
    label_map: Vec<usize>,
    merges: Vec<MergeRecord>,
    clusters: Vec<String>,
    early: Vec<String>,
}

fn ghi_centroid(days: &[&DayProfile], members: &[usize]) -> Vec<f64> {
    let mut c = vec![0.0; HOURS_PER_DAY];
    for &i in members {
        for (h, r) in days[i].records.iter().enumerate().take(HOURS_PER_DAY) {
            c[h] += r.ghi;
        }
    }
    c.iter_mut().for_each(|v| *v /= members.len() as f64);
    c
}

/// Groups of day indices per model after merging undersized clusters.
///
/// A cluster with fewer than `min_days` days is merged, smallest first, into
/// the cluster whose mean GHI profile is nearest.
pub fn merge_small_clusters(
    days: &[&DayProfile],
    labels: &[usize],
    k: usize,
    min_days: usize,
) -> (Vec<Vec<usize>>, Vec<Vec<usize>>, Vec<MergeRecord>) {
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        groups[l].push(i);
    }
    let mut owners: Vec<Vec<usize>> = (0..k).map(|l| vec![l]).collect();
    let mut merges = Vec::new();
    // Empty clusters have nothing to train on; drop them silently.
    let mut alive: Vec<usize> = (0..k).filter(|&g| !groups[g].is_empty()).collect();
    loop {
        if alive.len() < 2 {
            break;
        }
        let Some(&small) = alive
            .iter()
            .filter(|&&g| groups[g].len() < min_days)
            .min_by_key(|&&g| (groups[g].len(), g))
        else {
            break;
        };
        let cs = ghi_centroid(days, &groups[small]);
        let target = alive
            .iter()
            .copied()
            .filter(|&g| g != small)
            .map(|g| {
                let c = ghi_centroid(days, &groups[g]);
                let d: f64 = c.iter().zip(&cs).map(|(a, b)| (a - b) * (a - b)).sum();
                (g, d)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(g, _)| g)
            .expect("at least two clusters");
        merges.push(MergeRecord { from: small, into: target, days: groups[small].len() });
        let moved = std::mem::take(&mut groups[small]);
        groups[target].extend(moved);
        groups[target].sort_unstable();
        let o = std::mem::take(&mut owners[small]);
        owners[target].extend(o);
        owners[target].sort_unstable();
        alive.retain(|&g| g != small);
    }
    let g = alive.iter().map(|&g| groups[g].clone()).collect();
    let o = alive.iter().map(|&g| owners[g].clone()).collect();
    (g, o, merges)
}

/// Trains one one-hour-ahead model per cluster of `labels` (values in `0..k`).
///
/// Passing `k = 1` with all-zero labels gives the all-in-one model.
pub fn train_cluster_models(
    days: &[&DayProfile],
    labels: &[usize],
    k: usize,
    strategy: Strategy,
    cfg: &M3Config,
    early: Vec<M3Model>,
) -> Result<ForecastBundle, ForecastError> {
    assert_eq!(days.len(), labels.len(), "one label per day");
    let min_days = cfg.folds.max(20);
    let (groups, owners, merges) = merge_small_clusters(days, labels, k, min_days);
    for m in &merges {
        info!("{}: merged cluster {} ({} days) into {}", strategy.tag(), m.from, m.days, m.into);
    }
    let mut label_map = vec![0; k];
    let mut clusters = Vec::with_capacity(groups.len());
    for (gi, (members, labs)) in groups.iter().zip(&owners).enumerate() {
        for &l in labs {
            label_map[l] = gi;
        }
        let subset: Vec<&DayProfile> = members.iter().map(|&i| days[i]).collect();
        let (x, y) = one_hour_training_set(&subset)?;
        let mut c = cfg.clone();
        c.seed = super::mix_seed(cfg.seed, 0xC105, labs[0] as u64);
        let model = train_m3(&x, &y, &c)?;
        info!(
            "{}: cluster {:?} trained on {} days, blender {}",
            strategy.tag(),
            labs,
            subset.len(),
            model.selected_blender()
        );
        clusters.push(ClusterModel {
            labels: labs.clone(),
            n_days: subset.len(),
            blender: model.selected_blender().to_string(),
            model,
        });
    }
    // Labels of dropped empty clusters fall back to the largest model.
    let largest = (0..clusters.len()).max_by_key(|&i| (clusters[i].n_days, usize::MAX - i)).unwrap_or(0);
    for l in 0..k {
        if !owners.iter().any(|o| o.contains(&l)) {
            label_map[l] = largest;
        }
    }
    Ok(ForecastBundle { version: BUNDLE_VERSION, strategy, label_map, clusters, merges, early })
}

impl ForecastBundle {
    /// The model serving cluster `label`. A single-model bundle serves every
    /// label.
    pub fn model_for(&self, label: usize) -> Result<&ClusterModel, ForecastError> {
        if self.clusters.len() == 1 {
            return Ok(&self.clusters[0]);
        }
        self.label_map
            .get(label)
            .and_then(|&i| self.clusters.get(i))
            .ok_or(ForecastError::UnknownCluster(label))
    }

    /// Writes the bundle as a directory of JSON documents.
    pub fn save_dir(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut manifest = Manifest {
            version: self.version,
            strategy: self.strategy,
            label_map: self.label_map.clone(),
            merges: self.merges.clone(),
            clusters: Vec::new(),
            early: Vec::new(),
        };
        for (i, c) in self.clusters.iter().enumerate() {
            let name = format!("cluster-{i}.json");
            fs::write(dir.join(&name), serde_json::to_vec(c)?)?;
            manifest.clusters.push(name);
        }
        for (i, m) in self.early.iter().enumerate() {
            let name = format!("early-{}.json", super::EARLY_HOURS[i]);
            fs::write(dir.join(&name), serde_json::to_vec(m)?)?;
            manifest.early.push(name);
        }
        fs::write(dir.join("bundle.json"), serde_json::to_vec_pretty(&manifest)?)
    }

    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        let read = |name: &str| fs::read(dir.join(name));
        let manifest: Manifest = serde_json::from_slice(&read("bundle.json")?)?;
        if manifest.version != BUNDLE_VERSION {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("bundle version {} (expected {BUNDLE_VERSION})", manifest.version),
            ));
        }
        let clusters = manifest
            .clusters
            .iter()
            .map(|n| Ok(serde_json::from_slice(&read(n)?)?))
            .collect::<std::io::Result<Vec<ClusterModel>>>()?;
        let early = manifest
            .early
            .iter()
            .map(|n| Ok(serde_json::from_slice(&read(n)?)?))
            .collect::<std::io::Result<Vec<M3Model>>>()?;
        Ok(Self {
            version: manifest.version,
            strategy: manifest.strategy,
            label_map: manifest.label_map,
            clusters,
            merges: manifest.merges,
            early,
        })
    }
}
