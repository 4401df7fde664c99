//! Certified convergence rate of the heavy-ball method on strongly convex,
//! smooth functions.
//!
//! ```text
//! cargo run --example radius
//! ```

use iqc_radius::linalg::{from_row_major, Mat};
use iqc_radius::model::{IqcSet, SystemData};
use iqc_radius::radius::{spectral_radius, RadiusOptions};
use iqc_radius::sdp::margin::margin_at;

fn main() -> iqc_radius::Result<()> {
    let (alpha, beta, mf, l) = (0.05, 0.3, 1.0, 10.0);
    // State [x_k; x_{k-1}], input u_k = ∇f(x_k).
    let sys = SystemData::from_row_major(2, 1, &[1.0 + beta, -beta, 1.0, 0.0], &[-alpha, 0.0])?;
    // Sector constraint (u - m x)(L x - u) >= 0 on the current iterate.
    let mut m = Mat::zeros(3, 3);
    m[(0, 0)] = -2.0 * mf * l;
    m[(0, 2)] = mf + l;
    m[(2, 0)] = mf + l;
    m[(2, 2)] = -2.0;
    let iqcs = IqcSet::for_system(&sys, vec![m])?;

    let cert = spectral_radius(&sys, &iqcs, &RadiusOptions::default())?;
    println!("rho      = {:.6}", cert.rho);
    println!("bracket  = [{:.8}, {:.8}] after {} probes", cert.bracket.0, cert.bracket.1, cert.probes);
    println!("attained = {}", cert.attained);
    println!("P        = {:.4}", cert.p);
    println!("lambda   = {:?}", cert.lambdas);

    // The certificate is checked independently of the solver.
    let margin = margin_at(&sys, &iqcs, cert.rho, &cert.p, &cert.lambdas);
    println!("lambda_max of the LMI at rho: {margin:.3e}");

    // Without the IQC the input is free and nothing is certified.
    let free = spectral_radius(&sys, &IqcSet::empty(3), &RadiusOptions { rho_max: 10.0, ..Default::default() })?;
    println!("without the sector constraint: rho = {}", free.rho);

    let plain = SystemData::autonomous(from_row_major(2, 2, &[0.5, 1.0, 0.0, -0.8]))?;
    let c = spectral_radius(&plain, &IqcSet::empty(2), &RadiusOptions::default())?;
    println!("no input, no IQCs: rho = {:.6} (eigenvalue radius 0.8)", c.rho);
    Ok(())
}
