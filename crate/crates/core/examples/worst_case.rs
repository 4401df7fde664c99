//! Worst-case trajectory for a system at radius exactly one: the modes
//! `(X, U, F)`, the direction `v`, the static feedback gain and the checks
//! on the resulting trajectory.
//!
//! ```text
//! cargo run --example worst_case
//! ```

use iqc_radius::linalg::{from_row_major, null_space, sym, vstack, Mat};
use iqc_radius::model::{lyapunov_operator, IqcSet, SystemData};
use iqc_radius::verify::check_witness;
use iqc_radius::worstcase::{worst_case, WorstCaseOptions, WorstCaseOutcome};

fn main() -> iqc_radius::Result<()> {
    // Choose the modes first: X = I, F a rotation, U arbitrary. Then
    // A = F − BU makes AX + BU = XF hold.
    let theta: f64 = 1.1;
    let f = from_row_major(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
    let u = from_row_major(1, 2, &[0.4, -0.7]);
    let b = from_row_major(2, 1, &[1.0, 0.5]);
    let sys = SystemData::new(&f - &b * &u, b)?;

    // An IQC that certifies radius one with P = I and is tight exactly on
    // the span of [X; U].
    let w = null_space(&vstack(&Mat::identity(2, 2), &u).transpose(), 1e-12);
    let m = sym(&(-lyapunov_operator(&Mat::identity(2, 2), &sys, 1.0)? - &w * w.transpose()));
    let iqcs = IqcSet::for_system(&sys, vec![m])?;

    let opts = WorstCaseOptions::default();
    let report = match worst_case(&sys, &iqcs, &opts)? {
        WorstCaseOutcome::Witness(w) => w,
        WorstCaseOutcome::NoWitness(nw) => {
            println!("no witness at stage {}: {}", nw.stage, nw.reason);
            return Ok(());
        }
    };
    let modes = &report.modes;
    println!("rank of the dual witness: {}", modes.d);
    println!("F = {:.5}", modes.f);
    for g in &modes.groups {
        println!("eigen-group at angle {:.5} with multiplicity {}", g.theta, g.multiplicity());
    }
    println!("v = {:.5} ({} method)", report.v, report.method);
    if let Some(k) = &report.gain {
        println!("worst-case input is u = Kx with K = {:.5}", k);
    }
    println!("IQC sum lower bounds: {:?}", report.lower_bounds);

    let states = report.trajectory.states();
    for k in [0, 1, 2, 1000] {
        println!("|x_{k}| = {:.6}", states[k].norm());
    }
    let checks = check_witness(&sys, &iqcs, &report, 10_000);
    for c in &checks.checks {
        println!("{:<24} {:>12.3e}  {}", c.name, c.value, if c.passed { "ok" } else { "FAILED" });
    }
    Ok(())
}
