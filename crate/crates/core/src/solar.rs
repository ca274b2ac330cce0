//! Solar geometry and clear-sky irradiance providers.

use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

/// A site on the ground. Longitude is positive east.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub latitude: f64,
    pub longitude: f64,
    pub elevation: f64,
    /// Offset of local standard time from UTC, hours. Defaults to the
    /// nearest 15° meridian when absent.
    #[serde(default)]
    pub utc_offset: Option<f64>,
}

impl Location {
    pub fn new(latitude: f64, longitude: f64, elevation: f64) -> Self {
        Self { latitude, longitude, elevation, utc_offset: None }
    }

    /// NREL Solar Radiation Research Laboratory, Golden, Colorado.
    pub fn golden_colorado() -> Self {
        Self::new(39.74, -105.18, 1828.8)
    }

    pub fn utc_offset_hours(&self) -> f64 {
        self.utc_offset.unwrap_or_else(|| (self.longitude / 15.0).round())
    }
}

/// Cosine of the solar zenith angle at a local standard timestamp.
///
/// NOAA fractional-year approximations for declination and equation of time.
pub fn cos_zenith(ts: NaiveDateTime, loc: &Location) -> f64 {
    let doy = ts.ordinal() as f64;
    let hour = ts.hour() as f64 + ts.minute() as f64 / 60.0 + ts.second() as f64 / 3600.0;
    let g = 2.0 * std::f64::consts::PI / 365.0 * (doy - 1.0 + (hour - 12.0) / 24.0);
    let eqtime = 229.18
        * (0.000075 + 0.001868 * g.cos() - 0.032077 * g.sin()
            - 0.014615 * (2.0 * g).cos()
            - 0.040849 * (2.0 * g).sin());
    let decl = 0.006918 - 0.399912 * g.cos() + 0.070257 * g.sin() - 0.006758 * (2.0 * g).cos()
        + 0.000907 * (2.0 * g).sin()
        - 0.002697 * (3.0 * g).cos()
        + 0.00148 * (3.0 * g).sin();
    let offset_min = eqtime + 4.0 * loc.longitude - 60.0 * loc.utc_offset_hours();
    let true_solar_min = hour * 60.0 + offset_min;
    let hour_angle = (true_solar_min / 4.0 - 180.0).to_radians();
    let lat = loc.latitude.to_radians();
    lat.sin() * decl.sin() + lat.cos() * decl.cos() * hour_angle.cos()
}

/// Haurwitz clear-sky GHI for a given cosine of zenith, W/m².
pub fn haurwitz_ghi(cos_zenith: f64) -> f64 {
    if cos_zenith <= 0.0 {
        0.0
    } else {
        1098.0 * cos_zenith * (-0.057 / cos_zenith).exp()
    }
}

/// Anything that can produce clear-sky GHI for a time and place.
pub trait ClearSkyModel: Send + Sync {
    fn ghi_clear(&self, ts: NaiveDateTime, loc: &Location) -> f64;
}

/// The fallback clear-sky model: Haurwitz on NOAA solar geometry.
#[derive(Debug, Clone, Copy, Default)]
pub struct Haurwitz;

impl ClearSkyModel for Haurwitz {
    fn ghi_clear(&self, ts: NaiveDateTime, loc: &Location) -> f64 {
        haurwitz_ghi(cos_zenith(ts, loc))
    }
}
