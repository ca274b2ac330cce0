//! Error metrics, improvement percentages and grouped reports.

use chrono::NaiveDate;
use occur_solar::evaluation::{grouped_report, improvement, nmae, nrmse, ForecastRecord, NormalizationRule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("improvement(9.73, 9.66)  = {:.2}%", improvement(9.73, 9.66)?);
    println!("improvement(11.46, 9.73) = {:.2}%", improvement(11.46, 9.73)?);

    let actual = [120.0, 340.0, 560.0, 610.0, 480.0];
    let forecast = [100.0, 360.0, 500.0, 650.0, 470.0];
    let rule = NormalizationRule::MeanActual;
    let basis = rule.basis(&actual)?;
    println!("\nbasis {basis:.1}: nMAE {:.2}%  nRMSE {:.2}%", nmae(&actual, &forecast, basis)?, nrmse(&actual, &forecast, basis)?);

    let date = NaiveDate::from_ymd_opt(2021, 7, 1).unwrap();
    let mut records = Vec::new();
    for (i, (&a, &f)) in actual.iter().zip(&forecast).enumerate() {
        for (group, model, scale) in [("uc-m3", "c-opt", 1.0), ("aio-m3", "c-opt", 1.5)] {
            records.push(ForecastRecord {
                date,
                hour: 10 + i as u32,
                actual: a,
                forecast: a + (f - a) * scale,
                group: group.into(),
                model: model.into(),
                cluster: 0,
            });
        }
    }
    let report = grouped_report(&records, rule)?;
    report.write_csv(std::io::stdout())?;
    for imp in &report.improvements {
        println!("{} {} over {}: ImpA {:.2}%  ImpR {:.2}%", imp.kind, imp.compared, imp.reference, imp.impa, imp.impr);
    }
    Ok(())
}
