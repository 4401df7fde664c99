//! The feasibility-margin program behind the radius bisection and its dual.
//!
//! Primal: minimize `s` over `sI ⪰ ℒρ(P) + Σ λᵢMᵢ`, `P ⪰ I`, `λ ≥ 0`.
//! Dual: maximize `trace ℒρ*(Q)` over `ℒρ*(Q) ⪰ 0`, `trace(QMᵢ) ≥ 0`,
//! `Q ⪰ 0`, `trace Q = 1`.
//!
//! Both sides are homogeneous apart from the normalizations, so whenever the
//! LMI is strictly feasible the primal is unbounded below and the dual is
//! empty.

use crate::linalg::{lambda_max, lambda_min, Mat};
use crate::model::{lyapunov_adjoint_unchecked, lyapunov_operator_unchecked, IqcSet, SystemData};
use crate::{Error, Result};

use super::{solve, LinExpr, LmiExpr, SdpProblem, SolverConfig, SolverStatus};

#[derive(Clone, Debug)]
pub struct MarginPrimal {
    pub status: SolverStatus,
    /// Optimal margin `s⋆`; `-∞` when the LMI is strictly feasible and NaN
    /// when the solve did not finish.
    pub s_star: f64,
    /// Returned `P`; unless optimal it is rescaled so that `λ_min(P) = 1`.
    pub p: Mat,
    pub lambdas: Vec<f64>,
    /// `λ_max(ℒρ(P) + Σ λᵢMᵢ)` at the returned point.
    pub margin: f64,
    /// Lower bound on `s⋆` from the multipliers.
    pub dual_bound: f64,
    /// Multiplier of the margin LMI, normalized to unit trace when meaningful.
    pub multiplier: Mat,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct MarginDual {
    pub status: SolverStatus,
    pub d_star: f64,
    pub q: Mat,
    pub iterations: usize,
}

/// Primal solution together with the dual point read off its multipliers.
#[derive(Clone, Debug)]
pub struct MarginPair {
    pub primal: MarginPrimal,
    /// Present only when the primal solved to optimality.
    pub dual: Option<MarginDual>,
}

fn check(sys: &SystemData, iqcs: &IqcSet, rho: f64, config: &SolverConfig) -> Result<()> {
    iqcs.check_system(sys)?;
    config.validate()?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument { arg: "rho", reason: format!("must be positive and finite, got {rho}") });
    }
    Ok(())
}

/// Margin at a given point, `λ_max(ℒρ(P) + Σ λᵢMᵢ)`.
pub fn margin_at(sys: &SystemData, iqcs: &IqcSet, rho: f64, p: &Mat, lambdas: &[f64]) -> f64 {
    lambda_max(&(lyapunov_operator_unchecked(p, sys, rho) + iqcs.combine(lambdas)))
}

fn primal_problem(
    sys: &SystemData,
    iqcs: &IqcSet,
    rho: f64,
    budget: Option<f64>,
    floor: Option<f64>,
) -> (SdpProblem, super::Var, super::Var, Vec<super::Var>, super::LmiId) {
    let n = sys.n();
    let dim = n + sys.m();
    let mut prob = SdpProblem::new();
    let s = prob.scalar();
    let p = prob.symmetric(n);
    let lam = prob.scalars(iqcs.len());
    prob.minimize(LinExpr::new().scalar(s, 1.0));

    let op_sys = sys.clone();
    let mut lmi = LmiExpr::new(dim)
        .scalar(s, Mat::identity(dim, dim))
        .map(p, move |e| -lyapunov_operator_unchecked(e, &op_sys, rho));
    for (v, m) in lam.iter().zip(iqcs.iter()) {
        lmi = lmi.scalar(*v, -m);
    }
    let id = prob.add_lmi(lmi);
    prob.add_lmi(LmiExpr::new(n).constant(&-Mat::identity(n, n)).map(p, |e| e.clone()));
    for v in &lam {
        prob.add_inequality(LinExpr::new().scalar(*v, 1.0));
    }
    if let Some(f) = floor {
        prob.add_inequality(LinExpr::new().scalar(s, 1.0).constant(f));
    }
    if let Some(kappa) = budget {
        let mut e = LinExpr::new().constant(kappa + n as f64).inner(p, -Mat::identity(n, n));
        for v in &lam {
            e = e.scalar(*v, -1.0);
        }
        prob.add_inequality(e);
    }
    (prob, s, p, lam, id)
}

fn run_primal(
    sys: &SystemData,
    iqcs: &IqcSet,
    rho: f64,
    budget: Option<f64>,
    floor: Option<f64>,
    config: &SolverConfig,
) -> Result<MarginPrimal> {
    check(sys, iqcs, rho, config)?;
    let (prob, s, p, lam, id) = primal_problem(sys, iqcs, rho, budget, floor);
    let sol = solve(&prob, config);
    let mut pm = sol.symmetric(p);
    let mut lambdas: Vec<f64> = lam.iter().map(|v| sol.scalar(*v).max(0.0)).collect();
    let s_star = match sol.status {
        SolverStatus::Optimal => sol.scalar(s),
        SolverStatus::Unbounded => f64::NEG_INFINITY,
        _ => f64::NAN,
    };
    if sol.status != SolverStatus::Optimal {
        // Any point with a negative margin certifies strict feasibility on its
        // own; remove the homogeneity by pinning the smallest eigenvalue of P
        // to one.
        let scale = lambda_min(&pm);
        if scale > 0.0 && scale.is_finite() {
            pm /= scale;
            lambdas.iter_mut().for_each(|l| *l /= scale);
        }
    }
    let mut multiplier = sol.lmi_multiplier(id).clone();
    let tr = multiplier.trace();
    if tr > 0.0 {
        multiplier /= tr;
    }
    Ok(MarginPrimal {
        status: sol.status,
        s_star,
        margin: margin_at(sys, iqcs, rho, &pm, &lambdas),
        p: pm,
        lambdas,
        dual_bound: sol.dual_objective,
        multiplier,
        iterations: sol.iterations,
    })
}

/// Smallest `trace(P) + Σ λᵢ` with `ℒρ(P) + Σ λᵢMᵢ ⪯ 0`, `P ⪰ I`, `λ ≥ 0`.
/// Returns the solver's last point whatever the status; callers check it
/// with [`margin_at`].
pub fn solve_min_trace(sys: &SystemData, iqcs: &IqcSet, rho: f64, config: &SolverConfig) -> Result<(SolverStatus, Mat, Vec<f64>)> {
    check(sys, iqcs, rho, config)?;
    let n = sys.n();
    let dim = n + sys.m();
    let mut prob = SdpProblem::new();
    let p = prob.symmetric(n);
    let lam = prob.scalars(iqcs.len());
    let mut obj = LinExpr::new().inner(p, Mat::identity(n, n));
    for v in &lam {
        obj = obj.scalar(*v, 1.0);
    }
    prob.minimize(obj);
    let op_sys = sys.clone();
    let mut lmi = LmiExpr::new(dim).map(p, move |e| -lyapunov_operator_unchecked(e, &op_sys, rho));
    for (v, m) in lam.iter().zip(iqcs.iter()) {
        lmi = lmi.scalar(*v, -m);
    }
    prob.add_lmi(lmi);
    prob.add_lmi(LmiExpr::new(n).constant(&-Mat::identity(n, n)).map(p, |e| e.clone()));
    for v in &lam {
        prob.add_inequality(LinExpr::new().scalar(*v, 1.0));
    }
    let sol = solve(&prob, config);
    let lambdas = lam.iter().map(|v| sol.scalar(*v).max(0.0)).collect();
    Ok((sol.status, sol.symmetric(p), lambdas))
}

/// Minimal margin with the `P ⪰ I` normalization.
pub fn solve_margin_primal(sys: &SystemData, iqcs: &IqcSet, rho: f64, config: &SolverConfig) -> Result<MarginPrimal> {
    run_primal(sys, iqcs, rho, None, None, config)
}

/// Minimal margin with `P ⪰ I` and the additional budget
/// `trace(P) − n + Σ λᵢ ≤ budget`, which keeps the program bounded.
///
/// A margin of zero is only reachable in the limit of unbounded `P` when the
/// infimum is not attained, so under a budget such instances report a strictly
/// positive margin.
pub fn solve_margin_budgeted(
    sys: &SystemData,
    iqcs: &IqcSet,
    rho: f64,
    budget: f64,
    config: &SolverConfig,
) -> Result<MarginPrimal> {
    if !(budget > 0.0) {
        return Err(Error::InvalidArgument { arg: "budget", reason: "must be positive".into() });
    }
    run_primal(sys, iqcs, rho, Some(budget), None, config)
}

/// Minimal margin with `P ⪰ I` and `s ≥ −floor`. The floor keeps the
/// program bounded when the LMI is strictly feasible; the optimum then sits
/// at `−floor`.
pub fn solve_margin_floored(
    sys: &SystemData,
    iqcs: &IqcSet,
    rho: f64,
    floor: f64,
    config: &SolverConfig,
) -> Result<MarginPrimal> {
    if !(floor > 0.0) {
        return Err(Error::InvalidArgument { arg: "floor", reason: "must be positive".into() });
    }
    run_primal(sys, iqcs, rho, None, Some(floor), config)
}

/// The trace-maximizing dual, solved directly.
pub fn solve_margin_dual(sys: &SystemData, iqcs: &IqcSet, rho: f64, config: &SolverConfig) -> Result<MarginDual> {
    check(sys, iqcs, rho, config)?;
    let n = sys.n();
    let dim = n + sys.m();
    let mut prob = SdpProblem::new();
    let q = prob.symmetric(dim);
    // trace ℒρ*(Q) = ⟨ℒρ(I), Q⟩
    let obj = lyapunov_operator_unchecked(&Mat::identity(n, n), sys, rho);
    prob.minimize(LinExpr::new().inner(q, -obj));
    let op_sys = sys.clone();
    prob.add_lmi(LmiExpr::new(n).map(q, move |e| lyapunov_adjoint_unchecked(e, &op_sys, rho)));
    prob.add_lmi(LmiExpr::new(dim).map(q, |e| e.clone()));
    for m in iqcs.iter() {
        prob.add_inequality(LinExpr::new().inner(q, m.clone()));
    }
    prob.add_equality(LinExpr::new().inner(q, Mat::identity(dim, dim)).constant(-1.0));
    let sol = solve(&prob, config);
    Ok(MarginDual { status: sol.status, d_star: -sol.objective, q: sol.symmetric(q), iterations: sol.iterations })
}

/// Solves the primal and reads the dual optimum off the margin multiplier.
pub fn solve_margin_pair(sys: &SystemData, iqcs: &IqcSet, rho: f64, config: &SolverConfig) -> Result<MarginPair> {
    let primal = solve_margin_primal(sys, iqcs, rho, config)?;
    let dual = (primal.status == SolverStatus::Optimal).then(|| {
        let q = primal.multiplier.clone();
        MarginDual {
            status: SolverStatus::Optimal,
            d_star: lyapunov_adjoint_unchecked(&q, sys, rho).trace(),
            q,
            iterations: primal.iterations,
        }
    });
    Ok(MarginPair { primal, dual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_row_major, lambda_min};

    fn scalar(a: f64) -> SystemData {
        SystemData::autonomous(Mat::from_element(1, 1, a)).unwrap()
    }

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn contraction_is_strictly_feasible() {
        let sys = scalar(0.5);
        let r = solve_margin_primal(&sys, &IqcSet::empty(1), 1.0, &cfg()).unwrap();
        assert_eq!(r.status, SolverStatus::Unbounded);
        assert!(r.margin < 0.0);
        assert!(lambda_min(&r.p) >= 1.0 - 1e-9);
        // P = 1 already gives −0.75.
        assert!((margin_at(&sys, &IqcSet::empty(1), 1.0, &Mat::identity(1, 1), &[]) + 0.75).abs() < 1e-15);
    }

    #[test]
    fn identity_has_zero_margin() {
        let r = solve_margin_primal(&scalar(1.0), &IqcSet::empty(1), 1.0, &cfg()).unwrap();
        assert_eq!(r.status, SolverStatus::Optimal);
        assert!(r.s_star.abs() < 1e-7, "{}", r.s_star);
    }

    #[test]
    fn jordan_margin_zero_at_one_and_negative_above() {
        let a = from_row_major(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let sys = SystemData::autonomous(a).unwrap();
        let none = IqcSet::empty(2);
        let r = solve_margin_primal(&sys, &none, 1.0, &cfg()).unwrap();
        assert!(r.s_star.abs() < 1e-5 || r.status != SolverStatus::Optimal, "{r:?}");
        let above = solve_margin_primal(&sys, &none, 1.01, &cfg()).unwrap();
        assert_eq!(above.status, SolverStatus::Unbounded);
        assert!(above.margin < 0.0);
        // The budget keeps the attainment gap visible.
        let b = solve_margin_budgeted(&sys, &none, 1.0, 1e6, &cfg()).unwrap();
        assert_eq!(b.status, SolverStatus::Optimal);
        assert!(b.s_star > 1e-5, "{}", b.s_star);
    }

    #[test]
    fn rotation_dual_is_half_identity() {
        let a = from_row_major(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let sys = SystemData::autonomous(a).unwrap();
        let d = solve_margin_dual(&sys, &IqcSet::empty(2), 1.0, &cfg()).unwrap();
        assert_eq!(d.status, SolverStatus::Optimal);
        assert!(d.d_star.abs() < 1e-6);
        assert!((&d.q - Mat::identity(2, 2) * 0.5).norm() < 1e-5, "{}", d.q);
        let pair = solve_margin_pair(&sys, &IqcSet::empty(2), 1.0, &cfg()).unwrap();
        let q = pair.dual.unwrap().q;
        assert!((q - Mat::identity(2, 2) * 0.5).norm() < 1e-5);
    }

    #[test]
    fn opposite_scalar_iqcs_leave_the_dual_empty() {
        let sys = scalar(1.0);
        let iqcs = IqcSet::new(1, vec![Mat::from_element(1, 1, 1.0), Mat::from_element(1, 1, -1.0)]).unwrap();
        let d = solve_margin_dual(&sys, &iqcs, 1.0, &cfg()).unwrap();
        assert_eq!(d.status, SolverStatus::Infeasible);
        let p = solve_margin_primal(&sys, &iqcs, 1.0, &cfg()).unwrap();
        assert_eq!(p.status, SolverStatus::Unbounded);
    }
}
