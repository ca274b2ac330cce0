//! Seeded synthetic irradiance data with three planted sky regimes.
//!
//! Each day draws a regime (clear, mixed, overcast). Hourly GHI is clear-sky
//! GHI times a clear-sky index that follows an AR(1) process around the
//! regime mean. Weather and sky-image features are derived from the index
//! with noise, so they carry the regime signal the way measured data would.

use std::io::Write;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DayProfile, Dataset, HourRecord, FIRST_HOUR, LAST_HOUR};
use crate::features::ENTROPY_BINS;
use crate::solar::{cos_zenith, haurwitz_ghi, Location};

pub const REGIME_NAMES: [&str; 3] = ["clear", "mixed", "overcast"];
/// Upper clip of the clear-sky index.
pub const CSI_MAX: f64 = 1.1;
/// Longest month block; keeps every block inside one calendar month.
pub const MAX_DAYS_PER_MONTH: usize = 28;

#[derive(Debug, Error, PartialEq)]
#[error("invalid synthetic config: {0}")]
pub struct InvalidConfig(pub &'static str);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_days: usize,
    pub year: i32,
    /// Proportions of clear, mixed and overcast days.
    pub mix: [f64; 3],
    pub csi_means: [f64; 3],
    /// Stationary standard deviation of the hourly index around the mean.
    pub volatilities: [f64; 3],
    /// Hour-to-hour autocorrelation of the index.
    pub ar_phi: f64,
    /// Scale of the noise on derived features; 0 makes them deterministic.
    pub noise: f64,
    pub location: Location,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_days: 96,
            year: 2020,
            mix: [0.4, 0.35, 0.25],
            csi_means: [0.95, 0.60, 0.25],
            volatilities: [0.02, 0.15, 0.08],
            ar_phi: 0.1,
            noise: 1.0,
            location: default_location(),
            seed: 0,
        }
    }
}

/// Near-equatorial site: clear-sky profiles change little over the year, so
/// day-to-day differences come from the sky regime.
pub fn default_location() -> Location {
    Location { latitude: 5.0, longitude: 0.0, elevation: 0.0, utc_offset: Some(0.0) }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), InvalidConfig> {
        if self.n_days == 0 || self.n_days > 12 * MAX_DAYS_PER_MONTH {
            return Err(InvalidConfig("n_days"));
        }
        if self.mix.iter().any(|p| !(*p >= 0.0)) || (self.mix.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(InvalidConfig("mix"));
        }
        if self.csi_means.iter().any(|m| !(*m > 0.0 && *m < CSI_MAX)) {
            return Err(InvalidConfig("csi_means"));
        }
        if self.volatilities.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(InvalidConfig("volatilities"));
        }
        if !(self.ar_phi > -1.0 && self.ar_phi < 1.0) {
            return Err(InvalidConfig("ar_phi"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(InvalidConfig("noise"));
        }
        if !(self.location.latitude.abs() <= 90.0) {
            return Err(InvalidConfig("location"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedLabel {
    pub date: NaiveDate,
    pub regime: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub labels: Vec<PlantedLabel>,
}

impl SynthOutput {
    pub fn regimes(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.regime).collect()
    }
}

/// Dates spread evenly over the twelve months: consecutive days from the
/// 1st of each month, remainder going to the earliest months.
pub fn synth_dates(n_days: usize, year: i32) -> Vec<NaiveDate> {
    let base = n_days / 12;
    let extra = n_days % 12;
    let mut out = Vec::with_capacity(n_days);
    for m in 1..=12u32 {
        let count = base + usize::from((m as usize) <= extra);
        let first = NaiveDate::from_ymd_opt(year, m, 1).expect("valid month");
        out.extend(first.iter_days().take(count));
    }
    out
}

/// Regime per day with counts fixed by largest-remainder rounding of the
/// mix, in shuffled order.
pub fn regime_sequence(n: usize, mix: &[f64; 3], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let raw: Vec<f64> = mix.iter().map(|p| p * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let mut left = n - counts.iter().sum::<usize>();
    for &r in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[r] += 1;
        left -= 1;
    }
    let mut seq: Vec<usize> = counts.iter().enumerate().flat_map(|(r, &c)| std::iter::repeat_n(r, c)).collect();
    seq.shuffle(rng);
    seq
}

pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthOutput, InvalidConfig> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dates = synth_dates(cfg.n_days, cfg.year);
    let regimes = regime_sequence(dates.len(), &cfg.mix, &mut rng);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let phi = cfg.ar_phi;
    let innov = (1.0 - phi * phi).sqrt();
    let h_max = (ENTROPY_BINS as f64).ln();

    let mut days = Vec::with_capacity(dates.len());
    let mut labels = Vec::with_capacity(dates.len());
    for (&date, &r) in dates.iter().zip(&regimes) {
        let mean = cfg.csi_means[r];
        let vol = cfg.volatilities[r];
        let mut dev = vol * std.sample(&mut rng);
        let mut records = Vec::new();
        for h in FIRST_HOUR..=LAST_HOUR {
            if h > FIRST_HOUR {
                dev = phi * dev + innov * vol * std.sample(&mut rng);
            }
            let ts = date.and_hms_opt(h, 0, 0).expect("valid hour");
            let cz = cos_zenith(ts, &cfg.location);
            let clr = haurwitz_ghi(cz);
            let csi = (mean + dev).clamp(0.0, CSI_MAX);
            let ghi = clr * csi;
            let mut noise = |scale: f64| cfg.noise * scale * std.sample(&mut rng);

            let kd = (1.0 - 0.85 * csi.min(1.0)).clamp(0.1, 1.0);
            let dhi = ghi * kd;
            let dni = if cz > 0.05 { ((ghi - dhi) / cz).min(1100.0) } else { 0.0 };
            let cloud = 1.0 - csi.min(1.0);
            let img_mu = (-0.4 + 0.4 * cloud + noise(0.03)).clamp(-1.0, 1.0);
            let img_sigma = (0.04 + 0.2 * cloud + noise(0.01)).max(0.0);
            let img_entropy = (1.0 + 3.0 * cloud + noise(0.1)).clamp(0.0, h_max);
            let temp = 24.0 + 6.0 * csi * clr / 1000.0 + noise(0.5);
            let rh = (85.0 - 30.0 * csi + noise(3.0)).clamp(0.0, 100.0);
            let pres = 1010.0 + noise(1.5);
            let ws = (3.0 + noise(1.0)).abs();
            let wd = rng.random_range(0.0..360.0);
            records.push(HourRecord {
                timestamp: ts,
                ghi,
                ghi_clr: Some(clr),
                dni,
                dhi,
                temp,
                rh,
                pres,
                ws,
                wd,
                img_mu: Some(img_mu),
                img_sigma: Some(img_sigma),
                img_entropy: Some(img_entropy),
                image_path: None,
            });
        }
        days.push(DayProfile::new(date, records));
        labels.push(PlantedLabel { date, regime: r });
    }
    Ok(SynthOutput { dataset: Dataset::from_days(days), labels })
}

/// `date,regime,regime_name` rows.
pub fn write_labels<W: Write>(labels: &[PlantedLabel], w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["date", "regime", "regime_name"])?;
    for l in labels {
        wr.write_record([l.date.to_string(), l.regime.to_string(), REGIME_NAMES[l.regime].to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::write_dataset;
    use chrono::Datelike;

    fn months(dates: &[NaiveDate]) -> Vec<u32> {
        dates.iter().map(|d| d.month()).collect()
    }

    #[test]
    fn counts_for_96_days() {
        let out = synth_generate(&SynthConfig::default()).unwrap();
        assert_eq!(out.dataset.len(), 96);
        assert_eq!(out.dataset.n_records(), 1248);
        assert_eq!(out.labels.len(), 96);
        assert!(out.dataset.incomplete_days().is_empty());
        let m = months(&out.dataset.days.iter().map(|d| d.date).collect::<Vec<_>>());
        for month in 1..=12 {
            assert_eq!(m.iter().filter(|&&x| x == month).count(), 8);
        }
    }

    #[test]
    fn regime_quota() {
        let cfg = SynthConfig { n_days: 200, ..Default::default() };
        let r = synth_generate(&cfg).unwrap().regimes();
        let c: Vec<usize> = (0..3).map(|k| r.iter().filter(|&&x| x == k).count()).collect();
        assert_eq!(c, vec![80, 70, 50]);
    }

    #[test]
    fn deterministic_csv() {
        let cfg = SynthConfig { seed: 11, ..Default::default() };
        let write = || {
            let out = synth_generate(&cfg).unwrap();
            let mut a = Vec::new();
            write_dataset(&out.dataset, &mut a).unwrap();
            write_labels(&out.labels, &mut a).unwrap();
            a
        };
        assert_eq!(write(), write());
    }

    #[test]
    fn config_validation() {
        let bad = |f: fn(&mut SynthConfig)| {
            let mut c = SynthConfig::default();
            f(&mut c);
            synth_generate(&c).unwrap_err().0
        };
        assert_eq!(bad(|c| c.mix = [0.5, 0.5, 0.5]), "mix");
        assert_eq!(bad(|c| c.csi_means[0] = 1.2), "csi_means");
        assert_eq!(bad(|c| c.n_days = 0), "n_days");
    }

    #[test]
    fn clear_sky_zero_at_night_positive_at_noon() {
        let loc = Location::new(40.0, -105.0, 1600.0);
        let cfg = SynthConfig { location: loc, n_days: 24, ..Default::default() };
        let out = synth_generate(&cfg).unwrap();
        for d in &out.dataset.days {
            let noon = d.record(12).unwrap().ghi_clr.unwrap();
            assert!(noon > 0.0);
            for r in &d.records {
                let cz = cos_zenith(r.timestamp, &loc);
                if cz <= 0.0 {
                    assert_eq!(r.ghi_clr, Some(0.0));
                }
            }
        }
    }

    #[test]
    fn features_stay_in_range() {
        let out = synth_generate(&SynthConfig { seed: 3, ..Default::default() }).unwrap();
        for r in out.dataset.days.iter().flat_map(|d| &d.records) {
            assert!(r.ghi >= 0.0 && r.ghi <= CSI_MAX * r.ghi_clr.unwrap() + 1e-9);
            assert!((-1.0..=1.0).contains(&r.img_mu.unwrap()));
            assert!(r.img_sigma.unwrap() >= 0.0);
            assert!(r.img_entropy.unwrap() <= (ENTROPY_BINS as f64).ln());
            assert!((0.0..=100.0).contains(&r.rh));
        }
    }
}
