//! Clear-sky GHI profiles from solar geometry for one site across the year.

use chrono::NaiveDate;
use occur_solar::solar::{cos_zenith, ClearSkyModel, Haurwitz, Location};

fn main() {
    let site = Location::golden_colorado();
    println!("Haurwitz clear-sky GHI (W/m2) at {:.2}N {:.2}E, UTC{:+}", site.latitude, site.longitude, site.utc_offset_hours());
    print!("{:<11}", "date");
    for h in 7..=19 {
        print!("{h:>6}");
    }
    println!();
    for (m, d) in [(3, 20), (6, 21), (9, 22), (12, 21)] {
        let date = NaiveDate::from_ymd_opt(2021, m, d).unwrap();
        print!("{date:<11}");
        for h in 7..=19 {
            let ts = date.and_hms_opt(h, 0, 0).unwrap();
            print!("{:>6.0}", Haurwitz.ghi_clear(ts, &site));
        }
        println!();
    }
    let noon = NaiveDate::from_ymd_opt(2021, 6, 21).unwrap().and_hms_opt(12, 0, 0).unwrap();
    println!("\nsolar zenith at noon on the June solstice: {:.1} deg", cos_zenith(noon, &site).acos().to_degrees());
}
