//! A Jordan block at one: radius one, infimum not attained, and trajectories
//! grow linearly.
//!
//! ```text
//! cargo run --example jordan
//! ```

use iqc_radius::linalg::from_row_major;
use iqc_radius::model::{simulate, zero_inputs, IqcSet, SystemData};
use iqc_radius::radius::{attainment_check, classify, spectral_radius, RadiusOptions};
use iqc_radius::verify::boundedness;

fn main() -> iqc_radius::Result<()> {
    let sys = SystemData::autonomous(from_row_major(2, 2, &[1.0, 1.0, 0.0, 1.0]))?;
    let iqcs = IqcSet::empty(2);
    let opts = RadiusOptions::default();

    let cert = spectral_radius(&sys, &iqcs, &opts)?;
    println!("rho = {:.8}, attained = {}", cert.rho, cert.attained);

    let (attained, solve) = attainment_check(&sys, &iqcs, 1.0, &opts)?;
    if let Some(r) = solve {
        println!("at rho = 1 with a trace budget: margin {:.3e}, trace P {:.1}, attained = {attained}", r.margin, r.p.trace());
    }

    let verdict = classify(&sys, &iqcs, &opts)?;
    println!("classification: {}", verdict.classification);
    for r in &verdict.reasons {
        println!("  {r}");
    }

    let x0 = iqc_radius::linalg::Vector::from_vec(vec![1.0, 1.0]);
    let traj = simulate(&sys, &x0, &zero_inputs(&sys, 100))?;
    for k in [0, 10, 50, 100] {
        println!("|x_{k}| = {:.3}", traj.states()[k].norm());
    }
    let b = boundedness(&traj);
    println!("growth exponent {:.2} (growing = {})", b.growth_exponent, b.growing);
    Ok(())
}
