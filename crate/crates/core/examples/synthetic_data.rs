//! Generates a synthetic year of hourly data with three planted sky regimes.
//!
//!     cargo run --example synthetic_data -- [n_days] [seed] [out.csv]

use occur_solar::data::write_dataset;
use occur_solar::synth::{synth_generate, SynthConfig, REGIME_NAMES};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cfg = SynthConfig {
        n_days: args.first().map_or(Ok(96), |s| s.parse())?,
        seed: args.get(1).map_or(Ok(0), |s| s.parse())?,
        ..SynthConfig::default()
    };
    let out = synth_generate(&cfg)?;
    let regimes = out.regimes();
    for (r, name) in REGIME_NAMES.iter().enumerate() {
        let days: Vec<_> = out.dataset.days.iter().zip(&regimes).filter(|(_, &g)| g == r).map(|(d, _)| d).collect();
        let mean_daily: f64 = days.iter().map(|d| d.records.iter().map(|h| h.ghi).sum::<f64>()).sum::<f64>() / days.len() as f64;
        println!("{name:<9} {:3} days, mean daily GHI {:7.0} Wh/m2", days.len(), mean_daily);
    }
    let day = &out.dataset.days[0];
    println!("\n{} ({}):", day.date, REGIME_NAMES[regimes[0]]);
    println!("hour   ghi  clear   csi  img_mu");
    for r in &day.records {
        println!("{:4} {:5.0} {:6.0} {:5.2} {:7.3}", r.hour(), r.ghi, r.ghi_clr.unwrap_or(0.0), r.csi(), r.img_mu.unwrap_or(0.0));
    }
    if let Some(path) = args.get(2) {
        write_dataset(&out.dataset, std::fs::File::create(path)?)?;
        println!("\nwritten to {path}");
    }
    Ok(())
}
