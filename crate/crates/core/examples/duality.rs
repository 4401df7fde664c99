//! The margin program and its dual at a fixed ρ. The optimal values agree;
//! a positive value means the LMI is infeasible at that ρ and `Q` proves it.
//!
//! ```text
//! cargo run --example duality
//! ```

use iqc_radius::linalg::{from_row_major, inner, lambda_min};
use iqc_radius::model::{lyapunov_adjoint_weighted, IqcSet, SystemData};
use iqc_radius::sdp::margin::solve_margin_pair;
use iqc_radius::sdp::SolverConfig;

fn main() -> iqc_radius::Result<()> {
    let sys = SystemData::new(from_row_major(2, 2, &[0.9, 0.6, -0.3, 1.1]), from_row_major(2, 1, &[0.5, -1.0]))?;
    let iqc = from_row_major(3, 3, &[1.0, 0.2, 0.0, 0.2, 0.5, 0.1, 0.0, 0.1, 0.3]);
    let iqcs = IqcSet::for_system(&sys, vec![iqc])?;

    for rho in [0.4, 0.7] {
        let pair = solve_margin_pair(&sys, &iqcs, rho, &SolverConfig::default())?;
        let p = &pair.primal;
        println!("rho = {rho}: primal {} with s* = {:.8}", p.status, p.s_star);
        if let Some(d) = &pair.dual {
            println!("          dual   {} with d* = {:.8}", d.status, d.d_star);
            let adj = lyapunov_adjoint_weighted(&d.q, &sys, rho)?;
            let worst: f64 = iqcs.iter().map(|m| inner(&d.q, m)).fold(f64::INFINITY, f64::min);
            println!("          trace Q = {:.6}, min eig of adjoint {:.2e}, min <Q, M> {worst:.2e}", d.q.trace(), lambda_min(&adj));
        }
    }
    Ok(())
}
