//! Dynamic IQC: a filter on the plant output is absorbed into the state and
//! becomes a static IQC on the augmented system.
//!
//! ```text
//! cargo run --example augment
//! ```

use iqc_radius::dynamic_iqc::{augment_all, IqcFilter, PlantData};
use iqc_radius::linalg::from_row_major;
use iqc_radius::radius::{spectral_radius, RadiusOptions};

fn main() -> iqc_radius::Result<()> {
    let plant = PlantData::new(
        from_row_major(2, 2, &[0.6, 0.4, -0.2, 0.7]),
        from_row_major(2, 1, &[0.0, 1.0]),
        from_row_major(1, 2, &[1.0, 0.0]),
        from_row_major(1, 1, &[0.0]),
    )?;
    // ψ_{k+1} = y_k and z = [ψ; u]: with M = diag(1/4, −1) the energy of u
    // is at most a quarter of the energy of y delayed one step.
    let delay = IqcFilter {
        a_psi: from_row_major(1, 1, &[0.0]),
        b_psi1: from_row_major(1, 1, &[1.0]),
        b_psi2: from_row_major(1, 1, &[0.0]),
        c_psi: from_row_major(2, 1, &[1.0, 0.0]),
        d_psi1: from_row_major(2, 1, &[0.0, 0.0]),
        d_psi2: from_row_major(2, 1, &[0.0, 1.0]),
        m: from_row_major(2, 2, &[0.25, 0.0, 0.0, -1.0]),
    };
    let (sys, iqcs) = augment_all(&plant, &[delay], &[])?;
    println!("augmented A = {:.3}", sys.a());
    println!("augmented B = {:.3}", sys.b());
    println!("static IQC = {:.3}", iqcs.get(0).unwrap());

    let cert = spectral_radius(&sys, &iqcs, &RadiusOptions::default())?;
    println!("rho = {:.6}, attained = {}", cert.rho, cert.attained);
    Ok(())
}
