//! Stability verdicts across the possible outcomes.
//!
//! ```text
//! cargo run --example classify
//! ```

use iqc_radius::linalg::{from_row_major, Mat};
use iqc_radius::model::{IqcSet, SystemData};
use iqc_radius::radius::{classify, RadiusOptions};

fn main() -> iqc_radius::Result<()> {
    let rot = |t: f64| from_row_major(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
    let cases: Vec<(&str, SystemData, IqcSet)> = vec![
        ("contraction", SystemData::autonomous(from_row_major(2, 2, &[0.5, 0.3, 0.0, 0.2]))?, IqcSet::empty(2)),
        ("rotation", SystemData::autonomous(rot(0.4))?, IqcSet::empty(2)),
        ("jordan block", SystemData::autonomous(from_row_major(2, 2, &[1.0, 1.0, 0.0, 1.0]))?, IqcSet::empty(2)),
        ("expanding", SystemData::autonomous(Mat::from_element(1, 1, 1.5))?, IqcSet::empty(1)),
        {
            // x+ = x/2 + u with u² <= x²/4: u = x/2 holds the state still.
            let sys = SystemData::from_row_major(1, 1, &[0.5], &[1.0])?;
            let m = from_row_major(2, 2, &[0.25, 0.0, 0.0, -1.0]);
            ("sector-bounded input", sys.clone(), IqcSet::for_system(&sys, vec![m])?)
        },
    ];
    let opts = RadiusOptions::default();
    for (name, sys, iqcs) in cases {
        let v = classify(&sys, &iqcs, &opts)?;
        println!("{name}: {} (rho = {:.6}, bounded = {})", v.classification, v.certificate.rho, v.bounded);
        for r in &v.reasons {
            println!("    {r}");
        }
    }
    Ok(())
}
