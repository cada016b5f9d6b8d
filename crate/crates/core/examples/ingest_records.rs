//! Turns sparse `(stay, feature, time, value)` records into standardized hourly
//! matrices with observation masks.

use cts_forge::data::{densify, fit_catalog, read_records_csv, sparsity};

const RECORDS: &str = "stay_id,feature_id,time_hours,value
a,hr,0.2,88
a,hr,0.7,91
a,sbp,0.4,120
a,hr,1.5,95
a,sbp,2.1,118
a,hr,2.9,97
a,hr,3.3,99
b,hr,0.1,72
b,sbp,1.2,135
b,hr,2.4,70
b,sbp,2.8,131
b,hr,3.6,74
c,hr,0.5,80
c,hr,2.5,82
";

fn main() -> cts_forge::Result<()> {
    let records = read_records_csv(RECORDS.as_bytes())?;
    let fit = fit_catalog(&records)?;
    for f in &fit.catalog.features {
        println!("feature {:4} mean {:7.2} std {:6.2}", f.id, f.mean, f.std);
    }
    let dense = densify(&records, &fit.catalog, 4, 2)?;
    println!(
        "{} stays kept over {} hours; {} dropped for gaps, {} too short",
        dense.series.len(),
        dense.hours,
        dense.dropped_gaps,
        dense.dropped_short
    );
    for s in &dense.series {
        for (t, (v, m)) in s.values.iter().zip(&s.mask).enumerate() {
            println!("  {} h{t}: values {:?} mask {:?}", s.stay_id, v.iter().map(|x| (x * 100.0).round() / 100.0).collect::<Vec<_>>(), m);
        }
    }
    let sp = sparsity(&dense.series)?;
    println!("imputed fraction per feature {:?}, overall {:.3}", sp.per_feature, sp.overall);
    Ok(())
}
