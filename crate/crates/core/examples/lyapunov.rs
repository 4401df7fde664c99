//! Lyapunov function `V_k = x_kᵀPx_k + Σλᵢ(IQC partial sums)` along a
//! gradient-descent run whose curvature changes every step.
//!
//! ```text
//! cargo run --example lyapunov
//! ```

use iqc_radius::linalg::{Mat, Vector};
use iqc_radius::model::{IqcSet, Provenance, SystemData, Trajectory};
use iqc_radius::radius::{strengthened_certificate, RadiusOptions};
use iqc_radius::verify::lyapunov_trace;

fn main() -> iqc_radius::Result<()> {
    let (alpha, mf, l) = (0.15, 1.0, 10.0);
    let sys = SystemData::from_row_major(1, 1, &[1.0], &[-alpha])?;
    let m = Mat::from_row_slice(2, 2, &[-2.0 * mf * l, mf + l, mf + l, -2.0]);
    let iqcs = IqcSet::for_system(&sys, vec![m])?;

    // ℒ(P) + ΣλᵢMᵢ ⪯ −I, so V drops by at least |x_k|² every step.
    let (p, lambdas) = strengthened_certificate(&sys, &iqcs, &RadiusOptions::default())?;
    println!("P = {:.4}, lambda = {:.4?}", p[(0, 0)], lambdas);

    let curvatures = [1.0, 10.0, 3.0, 7.5, 1.0, 9.9, 2.0, 5.0];
    let mut states = vec![Vector::from_element(1, 4.0)];
    let mut inputs = Vec::new();
    for c in curvatures {
        let x = states.last().unwrap();
        let u = Vector::from_element(1, c * x[0]);
        states.push(sys.step(x, &u));
        inputs.push(u);
    }
    let traj = Trajectory::new(states, inputs, Provenance::Simulated)?;
    let t = lyapunov_trace(&sys, &traj, &p, &lambdas, &iqcs)?;
    println!("{:>3} {:>11} {:>12} {:>12}", "k", "V_k", "ΔV_k", "-|x_k|²");
    for (k, d) in t.deltas.iter().enumerate() {
        println!("{k:>3} {:>11.5} {d:>12.5} {:>12.5}", t.values[k], -traj.states()[k].norm_squared());
    }
    println!("decrease identity error {:.1e}", t.identity_error);
    Ok(())
}
