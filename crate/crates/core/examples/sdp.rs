//! The semidefinite programming layer on its own: the smallest `t` with
//! `tI ⪰ A₀ + x A₁` over a scalar `x`, and a matrix-variable problem.
//!
//! ```text
//! cargo run --example sdp
//! ```

use iqc_radius::linalg::{from_row_major, lambda_max, Mat};
use iqc_radius::sdp::{solve, LinExpr, LmiExpr, SdpProblem, SolverConfig};

fn main() {
    let a0 = from_row_major(2, 2, &[2.0, 1.0, 1.0, 0.0]);
    let a1 = from_row_major(2, 2, &[1.0, 0.0, 0.0, -1.0]);

    let mut prob = SdpProblem::new();
    let t = prob.scalar();
    let x = prob.scalar();
    prob.minimize(LinExpr::new().scalar(t, 1.0));
    prob.add_lmi(LmiExpr::new(2).scalar(t, Mat::identity(2, 2)).scalar(x, -&a1).constant(&-&a0));
    let sol = solve(&prob, &SolverConfig::default());
    let (ts, xs) = (sol.scalar(t), sol.scalar(x));
    println!("{}: t = {ts:.8}, x = {xs:.8} in {} iterations", sol.status, sol.iterations);
    println!("check: lambda_max(A0 + x A1) = {:.8}", lambda_max(&(&a0 + &a1 * xs)));

    // Max-cut style relaxation: minimize ⟨C, X⟩ with X ⪰ 0, diag X = 1.
    let c = from_row_major(3, 3, &[0.0, 1.0, -1.0, 1.0, 0.0, 1.0, -1.0, 1.0, 0.0]);
    let mut prob = SdpProblem::new();
    let xv = prob.symmetric(3);
    prob.minimize(LinExpr::new().inner(xv, c));
    prob.add_lmi(LmiExpr::new(3).map(xv, |e| e.clone()));
    for i in 0..3 {
        let mut e = Mat::zeros(3, 3);
        e[(i, i)] = 1.0;
        prob.add_equality(LinExpr::new().inner(xv, e).constant(-1.0));
    }
    let sol = solve(&prob, &SolverConfig::default());
    println!("{}: objective {:.6}, dual bound {:.6}", sol.status, sol.objective, sol.dual_objective);
    println!("X = {:.4}", sol.symmetric(xv));
}
