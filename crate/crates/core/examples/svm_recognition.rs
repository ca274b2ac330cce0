//! Day-type recognition: an SVM reads the 7-10am features of a day and
//! names its cluster. Trained on planted regimes of synthetic data.

use occur_solar::data::{split_train_test, Subset};
use occur_solar::recognition::{build_pr_vector, confusion_matrix, pr_metrics, train_classifier, SvmParams};
use occur_solar::synth::{synth_generate, SynthConfig, REGIME_NAMES};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = synth_generate(&SynthConfig { n_days: 144, seed: 1, ..SynthConfig::default() })?;
    let regime: std::collections::BTreeMap<_, _> = out.labels.iter().map(|l| (l.date, l.regime)).collect();
    let ds = split_train_test(&out.dataset, 0.75, 1)?;
    let (train, test) = (ds.subset(Subset::Train), ds.subset(Subset::Test));

    let x: Vec<Vec<f64>> = train.iter().map(|d| build_pr_vector(d)).collect::<Result<_, _>>()?;
    let y: Vec<usize> = train.iter().map(|d| regime[&d.date]).collect();
    let clf = train_classifier(&x, &y, &SvmParams::default())?;
    println!("{} training days, {}-dim inputs; selected C = {}, rho = {:.3}", x.len(), x[0].len(), clf.c, clf.rho);
    for g in &clf.grid {
        println!("  C {:>6}  rho {:6.3}  cv accuracy {:.3}", g.c, g.rho, g.cv_accuracy);
    }

    let recognized: Vec<usize> = test.iter().map(|d| clf.predict(&build_pr_vector(d)?)).collect::<Result<_, _>>()?;
    let actual: Vec<usize> = test.iter().map(|d| regime[&d.date]).collect();
    let cm = confusion_matrix(&clf.classes, &recognized, &actual);
    let m = pr_metrics(&cm)?;
    println!("\nconfusion on {} test days (rows recognized, columns actual):", test.len());
    for (r, row) in cm.iter().enumerate() {
        println!("  {:<9} {:?}", REGIME_NAMES[r], row);
    }
    println!("sensitivity {:?}", m.sensitivity.iter().map(|v| format!("{:.1}%", 100.0 * v)).collect::<Vec<_>>());
    println!("precision   {:?}", m.precision.iter().map(|v| format!("{:.1}%", 100.0 * v)).collect::<Vec<_>>());
    println!("accuracy    {:.1}%", 100.0 * m.accuracy);
    Ok(())
}
