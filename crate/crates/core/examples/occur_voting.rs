//! Cross-validated cluster-count selection: every method at every K is
//! scored by three validity indices, and the indices vote on K.

use occur_solar::clustering::{adjusted_rand_index, Method};
use occur_solar::data::{build_day_matrix, Subset};
use occur_solar::occur::{run_occur, OccurConfig};
use occur_solar::synth::{synth_generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map_or(Ok(0), |s| s.parse())?;
    let out = synth_generate(&SynthConfig { seed, ..SynthConfig::default() })?;
    let m = build_day_matrix(&out.dataset, Subset::All)?;
    let cfg = OccurConfig { seed, ..OccurConfig::default() };
    let res = run_occur(&m.values, &cfg)?;

    println!("{:>3} {:>8}  {}", "K", "votes", Method::ALL.map(|m| format!("{:>25}", format!("{m} conn/silh/dunn"))).join(""));
    for k in 2..=cfg.k_max {
        print!("{k:>3} {:>8}  ", res.vote_vector.get(k));
        for meth in Method::ALL {
            let s = res.grid.cell(meth, k).expect("grid cell").scores;
            print!("{:>25}", format!("{:.1}/{:.2}/{:.2}", s.conn, s.silh, s.dunn));
        }
        println!();
    }
    let ari = adjusted_rand_index(&out.regimes(), &res.best_partition.labels);
    println!("\nk_opt = {}, best method {}, sizes {:?}", res.k_opt, res.best_method, res.best_partition.sizes());
    println!("adjusted Rand index vs planted regimes: {ari:.3}");
    Ok(())
}
