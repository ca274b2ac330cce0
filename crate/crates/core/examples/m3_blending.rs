//! Two-layer blending for one-hour-ahead GHI: eleven first-layer learners,
//! four second-layer candidates, and cross-validated selection of the
//! blender.
//!
//!     cargo run --release --example m3_blending

use occur_solar::data::DayProfile;
use occur_solar::forecast::{one_hour_training_set, train_m3, M3Config};
use occur_solar::synth::{synth_generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = synth_generate(&SynthConfig { n_days: 60, seed: 2, ..SynthConfig::default() })?;
    let days: Vec<&DayProfile> = out.dataset.days.iter().collect();
    let (x, y) = one_hour_training_set(&days)?;
    println!("{} samples x {} inputs", x.nrows(), x.ncols());

    let m = train_m3(&x, &y, &M3Config { seed: 2, ..M3Config::default() })?;
    println!("\nfirst layer (out-of-fold nMAE):");
    for (name, e) in m.variant_names.iter().zip(&m.variant_cv_nmae) {
        println!("  {name:<6} {e:6.2}%");
    }
    println!("best single variant: {}", m.variant_names[m.best_variant]);
    println!("\nsecond layer (mean nMAE over {} folds):", m.cv_table.len());
    for (name, e) in m.blender_names.iter().zip(m.mean_cv_nmae()) {
        println!("  {name:<6} {e:6.2}%");
    }
    println!("selected blender: {}", m.selected_blender());
    Ok(())
}
