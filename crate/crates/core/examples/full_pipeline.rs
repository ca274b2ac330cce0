//! Runs the whole pipeline on synthetic data and prints a summary.
//!
//!     cargo run --release --example full_pipeline -- [n_days] [seed] [out_dir]

use std::time::Instant;

use occur_solar::pipeline::{emit_outputs, run_pipeline, DataSource, PipelineConfig};
use occur_solar::synth::SynthConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n_days = args.first().map_or(Ok(96), |s| s.parse())?;
    let seed = args.get(1).map_or(Ok(0), |s| s.parse())?;

    let cfg = PipelineConfig {
        data: DataSource::Synthetic(SynthConfig { n_days, seed, ..Default::default() }),
        seed,
        ..Default::default()
    };
    let t = Instant::now();
    let art = run_pipeline(&cfg)?;
    let m = &art.manifest;
    println!("{} train / {} test days, k_opt = {} ({})", m.n_train_days, m.n_test_days, m.k_opt, m.best_method);
    if let Some(ari) = m.planted_ari {
        println!("adjusted Rand vs planted regimes: {ari:.3}");
    }
    if let Some(pr) = &m.recognition.metrics {
        println!("recognition accuracy on test days: {:.3}", pr.accuracy);
    }
    for (group, (a, r)) in &m.group_medians {
        println!("{group:<9} median nMAE {a:6.2}%  nRMSE {r:6.2}%");
    }
    for imp in &art.evaluation.improvements {
        println!("{} {} vs {}: ImpA {:.2}%  ImpR {:.2}%", imp.kind, imp.compared, imp.reference, imp.impa, imp.impr);
    }
    println!("elapsed {:.1} s", t.elapsed().as_secs_f64());

    if let Some(dir) = args.get(2) {
        emit_outputs(&art, dir.as_ref(), true)?;
        println!("artifacts written to {dir}");
    }
    Ok(())
}
