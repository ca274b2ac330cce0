//! The four clustering methods on daily GHI profiles, compared with the
//! planted regimes.

use occur_solar::clustering::{adjusted_rand_index, ahc_average, dhc, kmeans, kmedoids, KMeansConfig};
use occur_solar::data::{build_day_matrix, Subset};
use occur_solar::synth::{synth_generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = synth_generate(&SynthConfig::default())?;
    let m = build_day_matrix(&out.dataset, Subset::All)?;
    let truth = out.regimes();
    println!("{} days x {} hours\n", m.values.nrows(), m.values.ncols());
    println!("{:<9} {:>3} {:>14} {:>6}  sizes", "method", "K", "objective", "ARI");
    for k in 2..=4 {
        let parts = [
            kmeans(&m.values, k, &KMeansConfig::default())?,
            kmedoids(&m.values, k, 0, 300)?,
            ahc_average(&m.values, k)?.0,
            dhc(&m.values, k)?.0,
        ];
        for p in parts {
            let ari = adjusted_rand_index(&truth, &p.labels);
            println!("{:<9} {k:>3} {:>14.1} {ari:>6.3}  {:?}", p.method.name(), p.objective, p.sizes());
        }
    }
    Ok(())
}
