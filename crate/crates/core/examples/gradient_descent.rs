//! Rate of gradient descent against the closed form `max(|1 − αm|, |1 − αL|)`,
//! and an exponential-rate certificate for the scaled system.
//!
//! ```text
//! cargo run --example gradient_descent
//! ```

use iqc_radius::linalg::Mat;
use iqc_radius::model::{IqcSet, SystemData};
use iqc_radius::radius::{exponential_rate_certificate, spectral_radius, RadiusOptions};

fn gradient_descent(alpha: f64, mf: f64, l: f64) -> iqc_radius::Result<(SystemData, IqcSet)> {
    let sys = SystemData::from_row_major(1, 1, &[1.0], &[-alpha])?;
    let m = Mat::from_row_slice(2, 2, &[-2.0 * mf * l, mf + l, mf + l, -2.0]);
    let iqcs = IqcSet::for_system(&sys, vec![m])?;
    Ok((sys, iqcs))
}

fn main() -> iqc_radius::Result<()> {
    let (mf, l) = (1.0, 10.0);
    let opts = RadiusOptions::default();
    println!("{:>8} {:>10} {:>10} {:>9}", "alpha", "certified", "oracle", "attained");
    for alpha in [0.02, 0.05, 0.1, 2.0 / 11.0, 0.15, 0.19] {
        let (sys, iqcs) = gradient_descent(alpha, mf, l)?;
        let c = spectral_radius(&sys, &iqcs, &opts)?;
        let oracle = f64::max((1.0 - alpha * mf).abs(), (1.0 - alpha * l).abs());
        println!("{alpha:>8.4} {:>10.6} {oracle:>10.6} {:>9}", c.rho, c.attained);
    }

    // The scaled pair (A/ρ, B/ρ) is certified at radius one, so
    // |x_k| <= sqrt(cond P) ρ^k |x_0| for every admissible gradient sequence.
    let (sys, iqcs) = gradient_descent(2.0 / 11.0, mf, l)?;
    let (rho, cert) = exponential_rate_certificate(&sys, &iqcs, &opts)?;
    println!("exponential rate {rho:.6}, P = {:.4}, lambda = {:.4?}", cert.p[(0, 0)], cert.lambdas);
    Ok(())
}
