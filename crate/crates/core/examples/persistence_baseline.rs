//! Persistence of cloudiness: the clear-sky index is carried forward one
//! day (7am) or one hour (later hours).

use occur_solar::data::FIRST_HOUR;
use occur_solar::evaluation::{nmae, nrmse};
use occur_solar::forecast::{forecast_day_as, persistence_cloudiness, previous_seven_am, DayModel, ForecastBundle, Strategy, BUNDLE_VERSION};
use occur_solar::synth::{synth_generate, SynthConfig, REGIME_NAMES};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("persistence(400, 800, 900) = {}", persistence_cloudiness(400.0, 800.0, 900.0));

    let out = synth_generate(&SynthConfig::default())?;
    // Persistence needs no trained models.
    let bundle = ForecastBundle {
        version: BUNDLE_VERSION,
        strategy: Strategy::Aio,
        label_map: Vec::new(),
        clusters: Vec::new(),
        merges: Vec::new(),
        early: Vec::new(),
    };
    let regimes = out.regimes();
    let mut per_regime = vec![(Vec::new(), Vec::new()); 3];
    for (i, day) in out.dataset.days.iter().enumerate().skip(1) {
        let prev = previous_seven_am(&out.dataset.days[i - 1])?;
        let fc = forecast_day_as(&bundle, day, Some(prev), DayModel::Persistence, 0)?;
        let (a, f) = &mut per_regime[regimes[i]];
        a.extend(day.records.iter().map(|r| r.ghi));
        f.extend(fc.ghi);
    }
    let day = &out.dataset.days[1];
    let fc = forecast_day_as(&bundle, day, Some(previous_seven_am(&out.dataset.days[0])?), DayModel::Persistence, 0)?;
    println!("\n{}:", day.date);
    for (h, (r, f)) in day.records.iter().zip(&fc.ghi).enumerate() {
        println!("  {:2}:00  actual {:6.1}  forecast {:6.1}", FIRST_HOUR as usize + h, r.ghi, f);
    }
    println!();
    for (r, (a, f)) in per_regime.iter().enumerate() {
        let basis = a.iter().sum::<f64>() / a.len() as f64;
        println!("{:<9} nMAE {:6.2}%  nRMSE {:6.2}%", REGIME_NAMES[r], nmae(a, f, basis)?, nrmse(a, f, basis)?);
    }
    Ok(())
}
