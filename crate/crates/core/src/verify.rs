//! Independent re-checks of certificates and witnesses.

use serde::{Deserialize, Serialize};

use crate::linalg::{lambda_max, lambda_min, norm2, Mat, Vector};
use crate::model::{iqc_partial_sums, lyapunov_operator, IqcSet, SystemData, Trajectory};
use crate::radius::RadiusCertificate;
use crate::worstcase::{build_trajectory, technical_slack, WitnessReport};
use crate::{Error, Result};

/// `Vₖ = xₖᵀPxₖ + Σᵢ λᵢ Σ_{j<k} [xⱼ;uⱼ]ᵀMᵢ[xⱼ;uⱼ]` along a trajectory, with the
/// per-step decrease computed two ways.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovTrace {
    pub values: Vec<f64>,
    /// `V_{k+1} − V_k`
    pub deltas: Vec<f64>,
    /// `[xₖ;uₖ]ᵀ(ℒ(P) + Σλᵢ Mᵢ)[xₖ;uₖ]`
    pub direct: Vec<f64>,
    /// Largest `|delta − direct| / (1 + |V_k| + |V_{k+1}|)`.
    pub identity_error: f64,
}

impl LyapunovTrace {
    pub fn identity_holds(&self, tol: f64) -> bool {
        self.identity_error <= tol
    }

    pub fn non_increasing(&self, slack: f64) -> bool {
        self.deltas.iter().all(|d| *d <= slack)
    }
}

pub fn lyapunov_trace(
    sys: &SystemData,
    traj: &Trajectory,
    p: &Mat,
    lambdas: &[f64],
    iqcs: &IqcSet,
) -> Result<LyapunovTrace> {
    iqcs.check_system(sys)?;
    if lambdas.len() != iqcs.len() {
        return Err(Error::DimensionMismatch {
            operand: "lambdas",
            expected: iqcs.len().to_string(),
            found: lambdas.len().to_string(),
        });
    }
    let lmi = lyapunov_operator(p, sys, 1.0)? + iqcs.combine(lambdas);
    let sums = iqc_partial_sums(traj, iqcs)?;
    let states = traj.states();
    let mut values = Vec::with_capacity(states.len());
    for (k, x) in states.iter().enumerate() {
        let acc: f64 = if k == 0 { 0.0 } else { lambdas.iter().zip(&sums).map(|(l, s)| l * s[k - 1]).sum() };
        values.push(x.dot(&(p * x)) + acc);
    }
    let deltas: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let direct: Vec<f64> = (0..traj.len())
        .map(|k| {
            let z = traj.stacked(k);
            z.dot(&(&lmi * &z))
        })
        .collect();
    let identity_error = deltas
        .iter()
        .zip(&direct)
        .enumerate()
        .map(|(k, (d, q))| (d - q).abs() / (1.0 + values[k].abs() + values[k + 1].abs()))
        .fold(0.0, f64::max);
    Ok(LyapunovTrace { values, deltas, direct, identity_error })
}

pub fn lyapunov_trace_for(
    sys: &SystemData,
    traj: &Trajectory,
    cert: &RadiusCertificate,
    iqcs: &IqcSet,
) -> Result<LyapunovTrace> {
    lyapunov_trace(sys, traj, &cert.p, &cert.lambdas, iqcs)
}

/// One named check with the measured quantity and its threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    /// Passes when `value ≤ threshold`.
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), passed: value <= threshold, value, threshold }
    }

    /// Passes when `value ≥ threshold`.
    fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), passed: value >= threshold, value, threshold }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub checks: Vec<Check>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Largest `‖x_{k+1} − Axₖ − Buₖ‖ / (1 + ‖xₖ‖)`.
pub fn dynamics_residual(sys: &SystemData, traj: &Trajectory) -> f64 {
    let (xs, us) = (traj.states(), traj.inputs());
    (0..traj.len())
        .map(|k| (&xs[k + 1] - sys.step(&xs[k], &us[k])).norm() / (1.0 + xs[k].norm()))
        .fold(0.0, f64::max)
}

/// Re-derives the witness trajectory from its modes and checks every claim.
pub fn check_witness(sys: &SystemData, iqcs: &IqcSet, report: &WitnessReport, horizon: usize) -> CheckReport {
    let modes = &report.modes;
    let v = &report.v;
    let traj = build_trajectory(modes, v, horizon);
    let mut checks = vec![
        Check::at_most("dynamics", dynamics_residual(sys, &traj), 1e-8),
        Check::at_most("stored-dynamics", dynamics_residual(sys, &report.trajectory), 1e-8),
    ];

    match iqc_partial_sums(&traj, iqcs) {
        Ok(sums) => {
            for (i, (s, beta)) in sums.iter().zip(&report.lower_bounds).enumerate() {
                let worst = s.iter().map(|x| x - beta).fold(f64::INFINITY, f64::min);
                checks.push(Check::at_least(format!("iqc-{i}-lower-bound"), worst, -1e-6));
            }
            if sums.len() != report.lower_bounds.len() {
                checks.push(Check::at_most("iqc-bound-count", (sums.len() as f64 - report.lower_bounds.len() as f64).abs(), 0.0));
            }
        }
        Err(_) => checks.push(Check::at_most("iqc-dimensions", 1.0, 0.0)),
    }

    let vnorm = v.norm();
    let mut z = v.clone();
    let mut drift: f64 = 0.0;
    for _ in 0..horizon {
        z = &modes.f * z;
        drift = drift.max((z.norm() - vnorm).abs());
    }
    checks.push(Check::at_most("mode-norm-constancy", drift, 1e-9));
    checks.push(Check::at_most("orthogonality", (modes.f.transpose() * &modes.f - Mat::identity(modes.d, modes.d)).norm(), 1e-8));
    checks.push(Check::at_least("xv-norm", (&modes.x * v).norm(), 1e-8));
    if !modes.h.is_empty() {
        checks.push(Check::at_least("technical-condition", technical_slack(&modes.groups, &modes.h, v), -1e-8));
    }
    let bound = norm2(&modes.x) * vnorm + 1e-9;
    let peak = traj.state_norms().into_iter().fold(0.0, f64::max);
    checks.push(Check::at_most("state-bound", peak - bound, 0.0));

    if let Some(k) = &report.gain {
        let worst = (0..traj.len())
            .map(|j| (&traj.inputs()[j] - k * &traj.states()[j]).norm() / (1.0 + traj.states()[j].norm()))
            .fold(0.0, f64::max);
        checks.push(Check::at_most("feedback-gain", worst, 1e-6));
    }
    CheckReport { checks }
}

/// Re-checks a radius certificate: the LMI at `rho` and `P ⪰ I`.
pub fn check_certificate(sys: &SystemData, iqcs: &IqcSet, cert: &RadiusCertificate, strict_eps: f64) -> Result<CheckReport> {
    if !cert.is_finite() {
        return Ok(CheckReport::default());
    }
    let lmi = lyapunov_operator(&cert.p, sys, cert.rho)? + iqcs.combine(&cert.lambdas);
    let margin = lambda_max(&lmi);
    let n = sys.n();
    let mut checks = vec![
        Check::at_most("lmi-margin", margin, strict_eps.max(1e-6)),
        Check::at_least("p-minus-identity", lambda_min(&(&cert.p - Mat::identity(n, n))), -1e-6),
    ];
    if !cert.lambdas.is_empty() {
        checks.push(Check::at_least("multipliers", cert.lambdas.iter().copied().fold(f64::INFINITY, f64::min), 0.0));
    }
    Ok(CheckReport { checks })
}

/// Horizon-limited growth summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Boundedness {
    pub max_norm: f64,
    /// Slope of `log ‖xₖ‖` against `log k` over the second half of the horizon.
    pub growth_exponent: f64,
    pub growing: bool,
}

pub fn boundedness(traj: &Trajectory) -> Boundedness {
    let norms = traj.state_norms();
    let max_norm = norms.iter().copied().fold(0.0, f64::max);
    let start = (norms.len() / 2).max(1);
    let pts: Vec<(f64, f64)> = (start..norms.len())
        .filter(|&k| norms[k] > 0.0)
        .map(|k| ((k as f64).ln(), norms[k].ln()))
        .collect();
    let growth_exponent = if pts.len() < 2 {
        0.0
    } else {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        if sxx > 0.0 {
            sxy / sxx
        } else {
            0.0
        }
    };
    Boundedness { max_norm, growth_exponent, growing: growth_exponent >= 0.5 }
}

/// Minimum over the horizon of each partial IQC sum, the tightest constant
/// `β` the trajectory satisfies.
pub fn iqc_sum_minima(traj: &Trajectory, iqcs: &IqcSet) -> Result<Vec<f64>> {
    Ok(iqc_partial_sums(traj, iqcs)?.iter().map(|s| s.iter().copied().fold(f64::INFINITY, f64::min)).collect())
}

/// `‖zₖ‖` for `zₖ = Fᵏ v`, useful for checking constancy.
pub fn mode_norms(f: &Mat, v: &Vector, horizon: usize) -> Vec<f64> {
    let mut z = v.clone();
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(z.norm());
    for _ in 0..horizon {
        z = f * z;
        out.push(z.norm());
    }
    out
}
