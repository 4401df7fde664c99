//! Generalized spectral radius by bisection on the margin program, plus the
//! stability verdicts built on top of it.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::linalg::{lambda_min, null_space, spectral_radius as matrix_spectral_radius, Mat, Vector};
use crate::model::{simulate, zero_inputs, IqcSet, SystemData, Trajectory};
use crate::sdp::margin::{
    margin_at, solve_margin_budgeted, solve_margin_floored, solve_margin_primal, solve_min_trace, MarginPrimal,
};
use crate::sdp::{SolverConfig, SolverStatus};
use crate::worstcase::{witness_pipeline, NoWitness, WitnessReport, WorstCaseOptions, WorstCaseOutcome};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadiusOptions {
    pub bisect_tol: f64,
    pub rho_max: f64,
    pub strict_eps: f64,
    /// Bound on `trace(P) − n + Σλᵢ` used when deciding attainment.
    pub attain_budget: f64,
    pub solver: SolverConfig,
}

impl Default for RadiusOptions {
    fn default() -> Self {
        Self { bisect_tol: 1e-6, rho_max: 1e3, strict_eps: 1e-8, attain_budget: 1e6, solver: SolverConfig::default() }
    }
}

impl RadiusOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |arg, reason: &str| Err(Error::InvalidArgument { arg, reason: reason.into() });
        if !(self.bisect_tol > 0.0) {
            return bad("bisect_tol", "must be positive");
        }
        if !(self.rho_max > self.bisect_tol) || !self.rho_max.is_finite() {
            return bad("rho_max", "must be finite and exceed bisect_tol");
        }
        if !(self.strict_eps >= 0.0) {
            return bad("strict_eps", "must be nonnegative");
        }
        if !(self.attain_budget > 0.0) {
            return bad("attain_budget", "must be positive");
        }
        self.solver.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadiusCertificate {
    /// `+∞` when no feasible ρ up to `rho_max` was found.
    pub rho: f64,
    pub p: Mat,
    pub lambdas: Vec<f64>,
    /// Whether a margin of at most `strict_eps` is reachable at `rho` itself
    /// with a bounded certificate.
    pub attained: bool,
    /// `λ_max(ℒρ(P) + Σλᵢ Mᵢ)` for the returned `(P, λ)` at `rho`.
    pub margin: f64,
    pub bracket: (f64, f64),
    pub probes: usize,
}

impl RadiusCertificate {
    pub fn is_finite(&self) -> bool {
        self.rho.is_finite()
    }
}

enum Probe {
    Feasible(MarginPrimal),
    Infeasible,
}

fn classify_probe(r: MarginPrimal, opts: &RadiusOptions) -> Option<Probe> {
    // A point with nonpositive margin is checked directly, whatever the status.
    let verified = r.margin <= opts.strict_eps && lambda_min(&r.p) >= 1.0 - 1e-6 && r.lambdas.iter().all(|l| *l >= 0.0);
    match r.status {
        SolverStatus::Optimal if r.s_star <= opts.strict_eps => Some(Probe::Feasible(r)),
        SolverStatus::Optimal => Some(Probe::Infeasible),
        _ if verified => Some(Probe::Feasible(r)),
        _ if r.dual_bound > opts.strict_eps => Some(Probe::Infeasible),
        _ => None,
    }
}

fn probe(sys: &SystemData, iqcs: &IqcSet, rho: f64, opts: &RadiusOptions) -> Result<Probe> {
    let r = solve_margin_primal(sys, iqcs, rho, &opts.solver)?;
    debug!("probe rho={rho:.12} status={} s={:.3e} margin={:.3e}", r.status, r.s_star, r.margin);
    if let Some(p) = classify_probe(r, opts) {
        return Ok(p);
    }
    // Retry with the margin floored at −1, which keeps the program bounded.
    let r = solve_margin_floored(sys, iqcs, rho, 1.0, &opts.solver)?;
    debug!("floored probe rho={rho:.12} status={} s={:.3e} margin={:.3e}", r.status, r.s_star, r.margin);
    if let Some(p) = classify_probe(r, opts) {
        return Ok(p);
    }
    // A bounded certificate set keeps the iteration well posed; only a
    // verified point is trusted here.
    let r = solve_margin_budgeted(sys, iqcs, rho, opts.attain_budget, &opts.solver)?;
    debug!("budgeted probe rho={rho:.12} status={} margin={:.3e}", r.status, r.margin);
    if r.margin <= opts.strict_eps && lambda_min(&r.p) >= 1.0 - 1e-6 {
        return Ok(Probe::Feasible(r));
    }
    // Undecided probes count as infeasible, so `hi` only ever moves to a
    // verified certificate.
    warn!("probe at rho = {rho} undecided; treating as infeasible");
    Ok(Probe::Infeasible)
}

/// Smallest ρ (to within `bisect_tol`) for which the ρ-weighted Lyapunov LMI
/// with IQC multipliers is feasible.
pub fn spectral_radius(sys: &SystemData, iqcs: &IqcSet, opts: &RadiusOptions) -> Result<RadiusCertificate> {
    opts.validate()?;
    iqcs.check_system(sys)?;
    let mut probes = 0;

    // Upper end: feasibility is monotone in ρ, so double until it holds.
    let mut hi = matrix_spectral_radius(sys.a()).max(1.0).min(opts.rho_max);
    let mut lo = opts.bisect_tol;
    let mut best = loop {
        probes += 1;
        match probe(sys, iqcs, hi, opts)? {
            Probe::Feasible(r) => break r,
            Probe::Infeasible => {
                lo = lo.max(hi);
                if hi >= opts.rho_max {
                    warn!("no certificate up to rho_max = {}", opts.rho_max);
                    let n = sys.n();
                    return Ok(RadiusCertificate {
                        rho: f64::INFINITY,
                        p: Mat::zeros(n, n),
                        lambdas: Vec::new(),
                        attained: false,
                        margin: f64::INFINITY,
                        bracket: (opts.rho_max, f64::INFINITY),
                        probes,
                    });
                }
                hi = (2.0 * hi).min(opts.rho_max);
            }
        }
    };

    if lo < hi {
        probes += 1;
        match probe(sys, iqcs, lo, opts)? {
            Probe::Feasible(r) => {
                best = r;
                hi = lo;
                lo = 0.0;
            }
            Probe::Infeasible => {}
        }
    }
    while hi - lo > opts.bisect_tol {
        let mid = 0.5 * (lo + hi);
        probes += 1;
        match probe(sys, iqcs, mid, opts)? {
            Probe::Feasible(r) => {
                best = r;
                hi = mid;
            }
            Probe::Infeasible => lo = mid,
        }
    }

    let (attained, _) = attainment_check(sys, iqcs, hi, opts)?;
    let (p, lambdas) = polish(sys, iqcs, hi, best.p, best.lambdas, opts);
    Ok(RadiusCertificate {
        rho: hi,
        margin: margin_at(sys, iqcs, hi, &p, &lambdas),
        p,
        lambdas,
        attained,
        bracket: (lo, hi),
        probes,
    })
}

/// Replaces a bisection certificate, whose scale is arbitrary, by the one of
/// least `trace(P) + Σλᵢ` when that one checks out.
fn polish(sys: &SystemData, iqcs: &IqcSet, rho: f64, p: Mat, lambdas: Vec<f64>, opts: &RadiusOptions) -> (Mat, Vec<f64>) {
    let size = |p: &Mat, l: &[f64]| p.trace() + l.iter().sum::<f64>();
    if let Ok((status, q, mu)) = solve_min_trace(sys, iqcs, rho, &opts.solver) {
        let ok = margin_at(sys, iqcs, rho, &q, &mu) <= opts.strict_eps
            && lambda_min(&q) >= 1.0 - 1e-6
            && size(&q, &mu) < size(&p, &lambdas);
        debug!("polish at rho={rho}: status={status} accepted={ok}");
        if ok {
            return (q, mu);
        }
    }
    (p, lambdas)
}

/// Whether the infimum is attained at `rho`: the margin program with
/// `P ⪰ I` and a trace budget reaches a margin of at most `strict_eps`.
///
/// Solver trouble is reported as "not attained", never as a false positive.
pub fn attainment_check(
    sys: &SystemData,
    iqcs: &IqcSet,
    rho: f64,
    opts: &RadiusOptions,
) -> Result<(bool, Option<MarginPrimal>)> {
    opts.validate()?;
    let r = solve_margin_budgeted(sys, iqcs, rho, opts.attain_budget, &opts.solver)?;
    let ok = match r.status {
        SolverStatus::Optimal => r.s_star <= opts.strict_eps && r.margin <= opts.strict_eps + 1e-9,
        _ => r.margin <= opts.strict_eps && lambda_min(&r.p) >= 1.0 - 1e-6,
    };
    debug!("attainment at rho={rho}: status={} s={:.3e} -> {ok}", r.status, r.s_star);
    Ok((ok, Some(r)))
}

/// Certificate for the exponential rate ρ: the scaled pair `(A/ρ, B/ρ)` is
/// certified at radius one. It applies to trajectories satisfying the
/// ρ-weighted constraints `Σ ρ^{−2k} [xₖ;uₖ]ᵀMᵢ[xₖ;uₖ] ≥ β`.
pub fn exponential_rate_certificate(
    sys: &SystemData,
    iqcs: &IqcSet,
    opts: &RadiusOptions,
) -> Result<(f64, RadiusCertificate)> {
    let cert = spectral_radius(sys, iqcs, opts)?;
    if !cert.is_finite() {
        return Err(Error::Declined("no certificate up to rho_max".into()));
    }
    if !cert.attained {
        return Err(Error::Declined(format!("infimum not attained at rho = {}", cert.rho)));
    }
    let scaled = sys.scaled(cert.rho)?;
    let (ok, r) = attainment_check(&scaled, iqcs, 1.0, opts)?;
    let r = r.expect("attainment check returns its solve");
    if !ok {
        return Err(Error::Declined(format!("scaled system not certified at radius one (margin {:.3e})", r.margin)));
    }
    Ok((
        cert.rho,
        RadiusCertificate {
            rho: cert.rho,
            margin: r.margin,
            p: r.p,
            lambdas: r.lambdas,
            attained: true,
            bracket: cert.bracket,
            probes: cert.probes,
        },
    ))
}

/// `(P, λ)` with `ℒ(P) + Σ λᵢMᵢ ⪯ −I` at ρ = 1, which gives the Lyapunov
/// decrease `ΔVₖ ≤ −‖xₖ‖²`. Requires the LMI to be strictly feasible at one.
pub fn strengthened_certificate(sys: &SystemData, iqcs: &IqcSet, opts: &RadiusOptions) -> Result<(Mat, Vec<f64>)> {
    opts.validate()?;
    // The plain program is unbounded exactly when it is strictly feasible,
    // so bound it first.
    let mut r = solve_margin_floored(sys, iqcs, 1.0, 1.0, &opts.solver)?;
    if !(r.margin < -opts.strict_eps) {
        r = solve_margin_primal(sys, iqcs, 1.0, &opts.solver)?;
    }
    if !(r.margin < -opts.strict_eps) {
        return Err(Error::Declined(format!("not strictly feasible at rho = 1 (margin {:.3e})", r.margin)));
    }
    let scale = 1.0 / -r.margin;
    Ok((r.p * scale, r.lambdas.iter().map(|l| l * scale).collect()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    AsymptoticallyStable,
    Bounded,
    /// Not asymptotically stable: some IQC-satisfying trajectory has
    /// `limsup ‖xₖ‖ > 0`.
    WitnessUnstable,
    Inconclusive,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::AsymptoticallyStable => "asymptotically-stable",
            Classification::Bounded => "bounded",
            Classification::WitnessUnstable => "witness-unstable",
            Classification::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug)]
pub struct StabilityVerdict {
    pub classification: Classification,
    /// Robust boundedness is certified (radius one with attainment, or below).
    pub bounded: bool,
    pub certificate: RadiusCertificate,
    pub witness: Option<Box<WitnessReport>>,
    pub no_witness: Option<NoWitness>,
    /// Growing trajectory for defective unit-circle eigenvalues (m = 0 only).
    pub diagnostic: Option<Trajectory>,
    pub reasons: Vec<String>,
}

pub fn classify(sys: &SystemData, iqcs: &IqcSet, opts: &RadiusOptions) -> Result<StabilityVerdict> {
    let cert = spectral_radius(sys, iqcs, opts)?;
    let mut verdict = StabilityVerdict {
        classification: Classification::Inconclusive,
        bounded: false,
        certificate: cert.clone(),
        witness: None,
        no_witness: None,
        diagnostic: None,
        reasons: Vec::new(),
    };
    if !cert.is_finite() {
        verdict.reasons.push(format!("no certificate for rho <= {}", opts.rho_max));
        return Ok(verdict);
    }
    if cert.rho < 1.0 - opts.bisect_tol {
        verdict.classification = Classification::AsymptoticallyStable;
        verdict.bounded = true;
        verdict.reasons.push(format!("rho = {:.9} < 1", cert.rho));
        return Ok(verdict);
    }
    if (cert.rho - 1.0).abs() <= opts.bisect_tol {
        let (attained, _) = attainment_check(sys, iqcs, 1.0, opts)?;
        if attained {
            verdict.classification = Classification::Bounded;
            verdict.bounded = true;
            verdict.reasons.push("rho = 1 and the infimum is attained".into());
            let wc_opts = WorstCaseOptions { radius: opts.clone(), ..WorstCaseOptions::default() };
            match witness_pipeline(sys, iqcs, &wc_opts)? {
                WorstCaseOutcome::Witness(w) => {
                    verdict.classification = Classification::WitnessUnstable;
                    verdict.reasons.push("non-convergent IQC-satisfying trajectory constructed".into());
                    verdict.witness = Some(w);
                }
                WorstCaseOutcome::NoWitness(nw) => {
                    verdict.reasons.push(format!("no witness ({}): {}", nw.stage, nw.reason));
                    verdict.no_witness = Some(nw);
                }
            }
            return Ok(verdict);
        }
        verdict.reasons.push("rho = 1 but the infimum is not attained".into());
    } else {
        verdict.reasons.push(format!("rho = {:.9} > 1", cert.rho));
    }
    verdict.diagnostic = jordan_diagnostic(sys, 100);
    if verdict.diagnostic.is_some() {
        verdict.reasons.push("defective unit-circle eigenvalue: unbounded free response".into());
    }
    Ok(verdict)
}

/// Free response from a generalized eigenvector of a defective eigenvalue on
/// the unit circle. Only defined for systems without inputs; its norm grows
/// linearly.
pub fn jordan_diagnostic(sys: &SystemData, horizon: usize) -> Option<Trajectory> {
    if sys.m() != 0 {
        return None;
    }
    let a = sys.a();
    let n = sys.n();
    let id = Mat::identity(n, n);
    let tol = 1e-8;
    let eig = a.complex_eigenvalues();
    let mut seen: Vec<(f64, f64)> = Vec::new();
    for mu in eig.iter() {
        if (mu.norm() - 1.0).abs() > 1e-6 || mu.im < -1e-12 {
            continue;
        }
        if seen.iter().any(|(re, im)| (re - mu.re).abs() < 1e-6 && (im - mu.im).abs() < 1e-6) {
            continue;
        }
        seen.push((mu.re, mu.im));
        // Real factor whose kernel is the (real) eigenspace of μ and its conjugate.
        let q = if mu.im.abs() <= 1e-9 {
            a - &id * mu.re
        } else {
            a * a - a * (2.0 * mu.re) + &id * mu.norm_sqr()
        };
        let k1 = null_space(&q, tol);
        let k2 = null_space(&(&q * &q), tol);
        if k2.ncols() <= k1.ncols() {
            continue;
        }
        // Component of ker(q²) orthogonal to ker(q).
        let proj = &k2 - &k1 * (k1.transpose() * &k2);
        let (best, _) = (0..proj.ncols())
            .map(|j| (j, proj.column(j).norm()))
            .fold((0, 0.0), |acc, c| if c.1 > acc.1 { c } else { acc });
        let x0: Vector = proj.column(best).normalize();
        return simulate(sys, &x0, &zero_inputs(sys, horizon)).ok();
    }
    None
}
