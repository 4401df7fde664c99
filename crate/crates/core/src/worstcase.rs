//! Worst-case trajectories at radius one.
//!
//! The pipeline extracts a dual witness `Q`, factors it as `[X;U][X;U]ᵀ`,
//! recovers an orthogonal `F` with `AX + BU = XF`, splits `F` into eigen
//! groups, looks for a direction `v` meeting the technical condition and
//! finally generates `[xₖ;uₖ] = [X;U] Fᵏ v`.

use std::f64::consts::{PI, TAU};
use std::fmt;

use log::{debug, warn};
use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{lambda_min, norm2, pinv, singular_values, svd, sym, sym_eigen_desc, vstack, Mat, Vector};
use crate::model::{lyapunov_adjoint_unchecked, IqcSet, Provenance, SystemData, Trajectory};
use crate::radius::{spectral_radius, RadiusCertificate, RadiusOptions};
use crate::sdp::margin::solve_margin_dual;
use crate::sdp::{solve, LinExpr, LmiExpr, SdpProblem, SolverConfig, SolverStatus};
use crate::{Error, Result};

pub type CMat = DMatrix<Complex<f64>>;
pub type CVector = DVector<Complex<f64>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorstCaseOptions {
    /// Relative eigenvalue cutoff for the rank of `Q`.
    pub rank_tol: f64,
    /// Relative singular value cutoff for the rank of `X`.
    pub x_rank_tol: f64,
    pub angle_tol: f64,
    /// Allowed `‖ℒ*(Q)‖` for an accepted dual witness.
    pub adjoint_tol: f64,
    /// Procrustes residual scale; the pipeline aborts above 100 times this.
    pub procrustes_tol: f64,
    /// Relative cutoff for the full-column-rank test on `B`.
    pub input_rank_tol: f64,
    pub horizon: usize,
    /// Search window for the hard-IQC shift.
    pub shift_window: usize,
    pub radius: RadiusOptions,
}

impl Default for WorstCaseOptions {
    fn default() -> Self {
        Self {
            rank_tol: 1e-7,
            x_rank_tol: 1e-8,
            angle_tol: 1e-6,
            adjoint_tol: 1e-6,
            procrustes_tol: 1e-6,
            input_rank_tol: 1e-10,
            horizon: 10_000,
            shift_window: 10_000,
            radius: RadiusOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    RadiusPrecheck,
    InputGate,
    DualExtraction,
    RankFactor,
    OrthogonalFactor,
    EigenGrouping,
    TechnicalCondition,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::RadiusPrecheck => "radius-precheck",
            Stage::InputGate => "input-gate",
            Stage::DualExtraction => "dual-extraction",
            Stage::RankFactor => "rank-factor",
            Stage::OrthogonalFactor => "orthogonal-factor",
            Stage::EigenGrouping => "eigen-grouping",
            Stage::TechnicalCondition => "technical-condition",
        })
    }
}

/// Why the pipeline stopped without a witness.
#[derive(Clone, Debug, PartialEq)]
pub struct NoWitness {
    pub stage: Stage,
    pub reason: String,
}

impl NoWitness {
    pub fn new(stage: Stage, reason: impl Into<String>) -> Self {
        Self { stage, reason: reason.into() }
    }
}

/// One cluster of eigenvalues `e^{iθ}` of `F` with an orthonormal basis of
/// its eigenspace.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenGroup {
    pub theta: f64,
    pub w: CMat,
}

impl EigenGroup {
    pub fn multiplicity(&self) -> usize {
        self.w.ncols()
    }

    /// `W Wᴴ`
    pub fn projector(&self) -> CMat {
        &self.w * self.w.adjoint()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TechnicalMethod {
    /// Rank-one witness, `v = 1`.
    RankOne,
    /// Simple spectrum, `v = Σ Wⱼ`.
    SimpleSpectrum,
    /// Trace-minimizing relaxation with a rank-one optimum.
    Relaxation,
}

impl fmt::Display for TechnicalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TechnicalMethod::RankOne => "rank-one",
            TechnicalMethod::SimpleSpectrum => "simple-spectrum",
            TechnicalMethod::Relaxation => "relaxation",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorstCaseModes {
    pub q: Mat,
    pub d: usize,
    pub x: Mat,
    pub u: Mat,
    pub f: Mat,
    pub groups: Vec<EigenGroup>,
    /// `Hᵢ = [X;U]ᵀ Mᵢ [X;U]`
    pub h: Vec<Mat>,
    pub v: Option<Vector>,
}

impl WorstCaseModes {
    pub fn xu(&self) -> Mat {
        vstack(&self.x, &self.u)
    }
}

#[derive(Clone, Debug)]
pub struct WitnessReport {
    pub modes: WorstCaseModes,
    pub v: Vector,
    pub method: TechnicalMethod,
    pub trajectory: Trajectory,
    pub gain: Option<Mat>,
    pub lower_bounds: Vec<f64>,
    pub shift: Option<usize>,
    pub pointwise: bool,
}

#[derive(Clone, Debug)]
pub enum WorstCaseOutcome {
    Witness(Box<WitnessReport>),
    NoWitness(NoWitness),
}

/// Result of dual extraction: a witness or the reason none exists.
#[derive(Clone, Debug)]
pub enum DualWitness {
    Found(Mat),
    Absent(String),
}

/// Solves the trace-maximizing dual at ρ = 1 and checks the witness
/// conditions `Q ⪰ 0`, `trace Q = 1`, `ℒ*(Q) ≈ 0`, `trace(QMᵢ) ≥ 0`.
pub fn extract_dual_witness(
    sys: &SystemData,
    iqcs: &IqcSet,
    config: &SolverConfig,
    adjoint_tol: f64,
) -> Result<DualWitness> {
    let d = solve_margin_dual(sys, iqcs, 1.0, config)?;
    match d.status {
        SolverStatus::Optimal => {}
        SolverStatus::Infeasible => return Ok(DualWitness::Absent("dual program is infeasible".into())),
        s => return Ok(DualWitness::Absent(format!("dual solve inconclusive ({s})"))),
    }
    let q = sym(&d.q);
    let adj = norm2(&lyapunov_adjoint_unchecked(&q, sys, 1.0));
    let checks = [
        (lambda_min(&q) >= -1e-8, format!("Q not PSD (λ_min = {:.3e})", lambda_min(&q))),
        ((q.trace() - 1.0).abs() <= 1e-8, format!("trace Q = {}", q.trace())),
        (adj <= adjoint_tol, format!("‖ℒ*(Q)‖ = {adj:.3e} exceeds {adjoint_tol:.1e}")),
    ];
    for (ok, why) in checks {
        if !ok {
            return Ok(DualWitness::Absent(why));
        }
    }
    for (i, m) in iqcs.iter().enumerate() {
        let t = (&q * m).trace();
        if t < -1e-6 {
            return Ok(DualWitness::Absent(format!("trace(Q M_{i}) = {t:.3e} < 0")));
        }
    }
    Ok(DualWitness::Found(q))
}

/// `Q ≈ [X;U][X;U]ᵀ` from the eigenvalues above `rank_tol · λ_max`.
pub fn rank_factor(q: &Mat, n: usize, rank_tol: f64) -> Result<(Mat, Mat, usize)> {
    let dim = q.nrows();
    if q.ncols() != dim || n > dim {
        return Err(Error::dims("Q", (dim, dim), q.shape()));
    }
    let (vals, vecs) = sym_eigen_desc(q);
    let top = vals.first().copied().unwrap_or(0.0);
    if !(top > 0.0) || top < rank_tol {
        return Err(Error::InvalidArgument { arg: "Q", reason: "numerically zero".into() });
    }
    if vals.last().copied().unwrap_or(0.0) < -rank_tol * top.max(1.0) {
        return Err(Error::InvalidArgument { arg: "Q", reason: "not positive semidefinite".into() });
    }
    let d = vals.iter().filter(|&&l| l > rank_tol * top).count();
    let mut z = Mat::zeros(dim, d);
    for k in 0..d {
        z.set_column(k, &(vecs.column(k) * vals[k].sqrt()));
    }
    let x = z.rows(0, n).into_owned();
    let u = z.rows(n, dim - n).into_owned();
    Ok((x, u, d))
}

/// Orthogonal `F` minimizing `‖HF − G‖_F` (Procrustes). On directions that
/// `HᵀG` does not determine the completion closest to the identity is used.
pub fn recover_orthogonal_factor(h: &Mat, g: &Mat) -> Result<Mat> {
    if h.shape() != g.shape() {
        return Err(Error::dims("G", h.shape(), g.shape()));
    }
    let d = h.ncols();
    if d == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let c = h.transpose() * g;
    let dec = svd(&c);
    let u = dec.u;
    let v = dec.v_t.transpose();
    let s = &dec.s;
    let smax = s[0];
    let cut = 1e-10 * smax.max(f64::MIN_POSITIVE);
    let live: Vec<usize> = (0..d).filter(|&k| s[k] > cut).collect();
    let dead: Vec<usize> = (0..d).filter(|&k| s[k] <= cut).collect();
    let pick = |m: &Mat, cols: &[usize]| {
        let mut out = Mat::zeros(m.nrows(), cols.len());
        for (j, &k) in cols.iter().enumerate() {
            out.set_column(j, &m.column(k));
        }
        out
    };
    let (u1, v1) = (pick(&u, &live), pick(&v, &live));
    let mut f = &u1 * v1.transpose();
    if !dead.is_empty() {
        let (u0, v0) = (pick(&u, &dead), pick(&v, &dead));
        // Maximize trace(U0 O V0ᵀ) over orthogonal O.
        let m = v0.transpose() * &u0;
        let msvd = svd(&m);
        let o = msvd.v_t.transpose() * msvd.u.transpose();
        f += &u0 * o * v0.transpose();
    }
    Ok(f)
}

fn cnorm_cols_lex(a: &CVector, b: &CVector) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let o = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if o != std::cmp::Ordering::Equal {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

/// Makes the largest-magnitude entry real and positive.
fn fix_phase(w: &CVector) -> CVector {
    let pivot = w.iter().copied().fold(Complex::new(0.0, 0.0), |acc, z| if z.norm() > acc.norm() + 1e-12 { z } else { acc });
    if pivot.norm() == 0.0 {
        return w.clone();
    }
    let phase = pivot.conj() / pivot.norm();
    w.map(|z| z * phase)
}

fn gram_schmidt(cols: &[CVector]) -> Vec<CVector> {
    let mut out: Vec<CVector> = Vec::new();
    for c in cols {
        let mut w = c.clone();
        for _ in 0..2 {
            for b in &out {
                let proj = b.dotc(&w);
                w -= b * proj;
            }
        }
        let nrm = w.norm();
        if nrm > 1e-8 {
            out.push(w / Complex::new(nrm, 0.0));
        }
    }
    out
}

fn to_complex(m: &Mat) -> CMat {
    m.map(|x| Complex::new(x, 0.0))
}

/// Clusters the eigenvalues of an orthogonal `F` by angle and returns an
/// orthonormal eigenbasis for every cluster, ordered by increasing angle.
pub fn eigen_group(f: &Mat, angle_tol: f64) -> Result<Vec<EigenGroup>> {
    let d = f.nrows();
    if f.ncols() != d {
        return Err(Error::dims("F", (d, d), f.shape()));
    }
    if d == 0 {
        return Ok(Vec::new());
    }
    let (qs, t) = f.clone().schur().unpack();
    let scale = t.amax().max(1.0);
    let mut pairs: Vec<(f64, CVector)> = Vec::with_capacity(d);
    let mut k = 0;
    while k < d {
        let split = k + 1 == d || t[(k + 1, k)].abs() <= 1e-13 * scale;
        if split {
            let theta = if t[(k, k)] >= 0.0 { 0.0 } else { PI };
            pairs.push((theta, qs.column(k).map(|x| Complex::new(x, 0.0))));
            k += 1;
            continue;
        }
        let (a, b, c, dd) = (t[(k, k)], t[(k, k + 1)], t[(k + 1, k)], t[(k + 1, k + 1)]);
        let half = 0.5 * (a - dd);
        let disc = half * half + b * c;
        let basis = qs.columns(k, 2).into_owned();
        if disc >= 0.0 {
            // Real pair that was left unsplit.
            let mid = 0.5 * (a + dd);
            for lam in [mid + disc.sqrt(), mid - disc.sqrt()] {
                let y = if b.abs() >= c.abs() { Vector::from_vec(vec![b, lam - a]) } else { Vector::from_vec(vec![lam - dd, c]) };
                let w = &basis * y.normalize();
                pairs.push((if lam >= 0.0 { 0.0 } else { PI }, w.map(|x| Complex::new(x, 0.0))));
            }
        } else {
            let mu = Complex::new(0.5 * (a + dd), (-disc).sqrt());
            let y = if b.abs() >= c.abs() {
                CVector::from_vec(vec![Complex::new(b, 0.0), mu - a])
            } else {
                CVector::from_vec(vec![mu - dd, Complex::new(c, 0.0)])
            };
            let w = to_complex(&basis) * y;
            let w = &w / Complex::new(w.norm(), 0.0);
            let theta = mu.im.atan2(mu.re);
            pairs.push((theta, w.clone()));
            pairs.push((TAU - theta, w.map(|z| z.conj())));
        }
        k += 2;
    }

    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut clusters: Vec<Vec<(f64, CVector)>> = Vec::new();
    for (theta, w) in pairs {
        match clusters.last_mut() {
            Some(cl) if theta - cl.last().expect("nonempty").0 <= angle_tol => cl.push((theta, w)),
            Some(cl) => {
                let gap = theta - cl.last().expect("nonempty").0;
                if gap <= 10.0 * angle_tol {
                    warn!("eigenvalue angle gap {gap:.3e} is close to the clustering tolerance");
                }
                clusters.push(vec![(theta, w)]);
            }
            None => clusters.push(vec![(theta, w)]),
        }
    }
    if clusters.len() > 1 {
        let first = clusters[0][0].0;
        let last = clusters.last().and_then(|c| c.last()).expect("nonempty").0;
        if first + TAU - last <= angle_tol {
            let tail = clusters.pop().expect("nonempty");
            clusters[0].extend(tail);
        }
    }

    let mut groups = Vec::with_capacity(clusters.len());
    for cl in clusters {
        let mean: Complex<f64> = cl.iter().map(|(th, _)| Complex::from_polar(1.0, *th)).sum();
        let mut theta = mean.im.atan2(mean.re).rem_euclid(TAU);
        if theta > TAU - angle_tol {
            theta = 0.0;
        }
        let mut cols: Vec<CVector> = cl.into_iter().map(|(_, w)| fix_phase(&w)).collect();
        cols.sort_by(cnorm_cols_lex);
        let basis = gram_schmidt(&cols);
        if basis.len() != cols.len() {
            return Err(Error::Problem("eigenvectors of F are numerically dependent".into()));
        }
        let w = CMat::from_columns(&basis);
        groups.push(EigenGroup { theta, w });
    }
    groups.sort_by(|a, b| a.theta.total_cmp(&b.theta));

    // F W = W D and Wᴴ W = I within tolerance.
    let fc = to_complex(f);
    for g in &groups {
        let lam = Complex::from_polar(1.0, g.theta);
        let res = (&fc * &g.w - &g.w * lam).norm();
        if res > 1e-6 * (1.0 + g.multiplicity() as f64) {
            return Err(Error::Problem(format!("eigenvector residual {res:.3e} at theta = {}", g.theta)));
        }
    }
    let all: Vec<CVector> = groups.iter().flat_map(|g| g.w.column_iter().map(|c| c.into_owned())).collect();
    let w = CMat::from_columns(&all);
    let orth = (w.adjoint() * &w - CMat::identity(d, d)).norm();
    if orth > 1e-8 {
        return Err(Error::Problem(format!("eigenbasis not unitary ({orth:.3e})")));
    }
    Ok(groups)
}

/// `Σⱼ PⱼHPⱼ` with `Pⱼ = WⱼWⱼᴴ`.
pub fn group_average(groups: &[EigenGroup], h: &Mat) -> CMat {
    let d = h.nrows();
    let hc = to_complex(h);
    let mut out = CMat::zeros(d, d);
    for g in groups {
        let p = g.projector();
        out += &p * &hc * &p;
    }
    out
}

/// Smallest `vᵀ Re(Σⱼ PⱼHᵢPⱼ) v` over the IQCs, or `+∞` without IQCs.
pub fn technical_slack(groups: &[EigenGroup], h: &[Mat], v: &Vector) -> f64 {
    h.iter()
        .map(|hi| {
            let t = group_average(groups, hi).map(|z| z.re);
            v.dot(&(sym(&t) * v))
        })
        .fold(f64::INFINITY, f64::min)
}

/// Outcome of the technical-condition search.
#[derive(Clone, Debug)]
pub struct TechnicalOutcome {
    pub v: Option<Vector>,
    pub method: Option<TechnicalMethod>,
    pub diagnostic: String,
}

/// Looks for a real `v` with `‖Xv‖ > 0` satisfying the averaged IQC condition.
pub fn technical_condition(modes: &WorstCaseModes, config: &SolverConfig) -> TechnicalOutcome {
    let d = modes.d;
    let accept = |v: Vector, method: TechnicalMethod, modes: &WorstCaseModes| {
        let slack = technical_slack(&modes.groups, &modes.h, &v);
        let xv = (&modes.x * &v).norm();
        if slack >= -1e-8 && xv >= 1e-8 {
            TechnicalOutcome { v: Some(v), method: Some(method), diagnostic: format!("slack {slack:.3e}, |Xv| {xv:.3e}") }
        } else {
            TechnicalOutcome {
                v: None,
                method: None,
                diagnostic: format!("candidate rejected: slack {slack:.3e}, |Xv| {xv:.3e}"),
            }
        }
    };

    if d == 1 {
        return accept(Vector::from_element(1, 1.0), TechnicalMethod::RankOne, modes);
    }
    if modes.groups.iter().all(|g| g.multiplicity() == 1) {
        let mut sum = CVector::zeros(d);
        for g in &modes.groups {
            sum += g.w.column(0);
        }
        let imag = sum.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if imag <= 1e-10 {
            let out = accept(sum.map(|z| z.re), TechnicalMethod::SimpleSpectrum, modes);
            if out.v.is_some() {
                return out;
            }
        } else {
            debug!("sum of eigenvectors not real (imag {imag:.3e}); falling back to relaxation");
        }
    }
    if modes.h.is_empty() {
        // Every v qualifies; the relaxation optimum is the top right singular
        // direction of X.
        let (_, vecs) = sym_eigen_desc(&(modes.x.transpose() * &modes.x));
        let mut v: Vector = vecs.column(0).into_owned();
        let xv = (&modes.x * &v).norm();
        if xv > 0.0 {
            v /= xv;
        }
        return accept(v, TechnicalMethod::Relaxation, modes);
    }

    let mut prob = SdpProblem::new();
    let vv = prob.symmetric(d);
    prob.minimize(LinExpr::new().inner(vv, Mat::identity(d, d)));
    prob.add_lmi(LmiExpr::new(d).map(vv, |e| e.clone()));
    prob.add_equality(LinExpr::new().inner(vv, modes.x.transpose() * &modes.x).constant(-1.0));
    for hi in &modes.h {
        let t = sym(&group_average(&modes.groups, hi).map(|z| z.re));
        prob.add_inequality(LinExpr::new().inner(vv, t));
    }
    let sol = solve(&prob, config);
    if sol.status != SolverStatus::Optimal {
        return TechnicalOutcome { v: None, method: None, diagnostic: format!("relaxation solve: {}", sol.status) };
    }
    let vm = sol.symmetric(vv);
    let (vals, vecs) = sym_eigen_desc(&vm);
    let tr: f64 = vals.iter().sum();
    if !(vals[0] >= (1.0 - 1e-6) * tr) {
        return TechnicalOutcome {
            v: None,
            method: None,
            diagnostic: format!("relaxation optimum has rank > 1 (top share {:.6})", vals[0] / tr),
        };
    }
    accept(vecs.column(0) * vals[0].sqrt(), TechnicalMethod::Relaxation, modes)
}

/// `[xₖ;uₖ] = [X;U] F^{k+start} v` for `k = 0..horizon`.
pub fn build_trajectory_from(modes: &WorstCaseModes, v: &Vector, start: usize, horizon: usize) -> Trajectory {
    let mut z = v.clone();
    for _ in 0..start {
        z = &modes.f * z;
    }
    let mut states = Vec::with_capacity(horizon + 1);
    let mut inputs = Vec::with_capacity(horizon);
    for k in 0..=horizon {
        states.push(&modes.x * &z);
        if k < horizon {
            inputs.push(&modes.u * &z);
            z = &modes.f * z;
        }
    }
    Trajectory::new(states, inputs, Provenance::ModeGenerated).expect("lengths agree by construction")
}

pub fn build_trajectory(modes: &WorstCaseModes, v: &Vector, horizon: usize) -> Trajectory {
    build_trajectory_from(modes, v, 0, horizon)
}

/// `βᵢ = −Σ_{j≠ℓ} |vᵀPⱼHᵢP_ℓv| · 2/|1 − e^{i(θ_ℓ−θⱼ)}|`, a lower bound on every
/// partial IQC sum along the mode trajectory.
pub fn iqc_sum_lower_bound(modes: &WorstCaseModes, v: &Vector) -> Vec<f64> {
    let vc = v.map(|x| Complex::new(x, 0.0));
    let pv: Vec<CVector> = modes.groups.iter().map(|g| g.projector() * &vc).collect();
    modes
        .h
        .iter()
        .map(|h| {
            let hc = to_complex(h);
            let mut beta = 0.0;
            for (j, gj) in modes.groups.iter().enumerate() {
                for (l, gl) in modes.groups.iter().enumerate() {
                    if j == l {
                        continue;
                    }
                    let term = pv[j].dotc(&(&hc * &pv[l])).norm();
                    let denom = (Complex::new(1.0, 0.0) - Complex::from_polar(1.0, gl.theta - gj.theta)).norm();
                    beta -= term * 2.0 / denom;
                }
            }
            beta
        })
        .collect()
}

/// `K = U X†` when `X` has full column rank.
pub fn feedback_gain(modes: &WorstCaseModes, x_rank_tol: f64) -> Option<Mat> {
    let (n, d) = modes.x.shape();
    if d > n {
        return None;
    }
    let s = singular_values(&modes.x);
    let (smax, smin) = (s.first().copied()?, s.last().copied()?);
    if !(smin > x_rank_tol * smax) {
        return None;
    }
    Some(&modes.u * pinv(&modes.x, x_rank_tol))
}

/// Argmin of the partial sums of a single IQC along the mode trajectory.
///
/// Returned only when the minimum is reached before the final tenth of the
/// window, so the remaining window confirms nothing smaller follows.
pub fn hard_iqc_shift(modes: &WorstCaseModes, v: &Vector, window: usize) -> Option<usize> {
    if modes.h.len() != 1 || window < 10 {
        return None;
    }
    let m = &modes.h[0];
    let mut z = v.clone();
    let mut sum = 0.0;
    let mut best = (f64::INFINITY, 0);
    for n in 1..=window {
        sum += z.dot(&(m * &z));
        if sum < best.0 - 1e-12 * (1.0 + sum.abs()) {
            best = (sum, n);
        }
        z = &modes.f * z;
    }
    let tail = window / 10;
    (best.1 <= window - tail).then_some(best.1)
}

/// The pointwise form holds when `d = 1`; re-checked along the first
/// thousand steps.
pub fn pointwise_check(modes: &WorstCaseModes, v: &Vector, iqcs: &IqcSet) -> bool {
    if modes.d != 1 {
        return false;
    }
    let traj = build_trajectory(modes, v, 1000);
    (0..traj.len()).all(|k| {
        let z = traj.stacked(k);
        iqcs.iter().all(|m| z.dot(&(m * &z)) >= -1e-8 * (1.0 + z.norm_squared()))
    })
}

/// The pipeline without the radius pre-check.
pub fn witness_pipeline(sys: &SystemData, iqcs: &IqcSet, opts: &WorstCaseOptions) -> Result<WorstCaseOutcome> {
    iqcs.check_system(sys)?;
    let no = |stage, why: String| Ok(WorstCaseOutcome::NoWitness(NoWitness::new(stage, why)));
    let (n, m) = (sys.n(), sys.m());
    if m > 0 {
        let s = singular_values(sys.b());
        let smin = if m > n { 0.0 } else { *s.last().expect("m > 0") };
        if !(smin > opts.input_rank_tol * s[0]) {
            return no(Stage::InputGate, "B is not full column rank".into());
        }
    }

    let q = match extract_dual_witness(sys, iqcs, &opts.radius.solver, opts.adjoint_tol)? {
        DualWitness::Found(q) => q,
        DualWitness::Absent(why) => return no(Stage::DualExtraction, why),
    };
    let (x, u, d) = match rank_factor(&q, n, opts.rank_tol) {
        Ok(f) => f,
        Err(e) => return no(Stage::RankFactor, e.to_string()),
    };
    if x.norm() == 0.0 {
        return no(Stage::RankFactor, "X is zero".into());
    }
    let g = sys.a() * &x + sys.b() * &u;
    let f = recover_orthogonal_factor(&x, &g)?;
    let resid = (&x * &f - &g).norm();
    if resid > 100.0 * opts.procrustes_tol {
        return no(Stage::OrthogonalFactor, format!("dual witness inconsistent: |XF - G| = {resid:.3e}"));
    }
    let groups = match eigen_group(&f, opts.angle_tol) {
        Ok(g) => g,
        Err(e) => return no(Stage::EigenGrouping, e.to_string()),
    };
    let xu = vstack(&x, &u);
    let h: Vec<Mat> = iqcs.iter().map(|mi| sym(&(xu.transpose() * mi * &xu))).collect();
    let mut modes = WorstCaseModes { q, d, x, u, f, groups, h, v: None };

    let tc = technical_condition(&modes, &opts.radius.solver);
    let (v, method) = match (tc.v, tc.method) {
        (Some(v), Some(method)) => (v, method),
        _ => return no(Stage::TechnicalCondition, tc.diagnostic),
    };
    modes.v = Some(v.clone());

    let trajectory = build_trajectory(&modes, &v, opts.horizon);
    let gain = feedback_gain(&modes, opts.x_rank_tol);
    let lower_bounds = iqc_sum_lower_bound(&modes, &v);
    let shift = hard_iqc_shift(&modes, &v, opts.shift_window);
    let pointwise = pointwise_check(&modes, &v, iqcs);
    Ok(WorstCaseOutcome::Witness(Box::new(WitnessReport {
        modes,
        v,
        method,
        trajectory,
        gain,
        lower_bounds,
        shift,
        pointwise,
    })))
}

/// `None` when `cert` puts the radius at one within the bisection tolerance.
pub fn radius_precheck(cert: &RadiusCertificate, opts: &WorstCaseOptions) -> Option<NoWitness> {
    if (cert.rho - 1.0).abs() <= opts.radius.bisect_tol {
        return None;
    }
    Some(NoWitness::new(Stage::RadiusPrecheck, format!("rho = {} is not one", cert.rho)))
}

/// Full pipeline: requires the radius to be one (within the bisection
/// tolerance) before looking for a witness.
pub fn worst_case(sys: &SystemData, iqcs: &IqcSet, opts: &WorstCaseOptions) -> Result<WorstCaseOutcome> {
    let cert = spectral_radius(sys, iqcs, &opts.radius)?;
    match radius_precheck(&cert, opts) {
        Some(nw) => Ok(WorstCaseOutcome::NoWitness(nw)),
        None => witness_pipeline(sys, iqcs, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_row_major;

    fn rot(theta: f64) -> Mat {
        let (s, c) = theta.sin_cos();
        from_row_major(2, 2, &[c, -s, s, c])
    }

    #[test]
    fn rank_factor_examples() {
        let (x, u, d) = rank_factor(&(Mat::identity(2, 2) * 0.5), 2, 1e-7).unwrap();
        assert_eq!(d, 2);
        assert_eq!(u.shape(), (0, 2));
        assert!((&x * x.transpose() - Mat::identity(2, 2) * 0.5).norm() < 1e-14);

        let mut e1 = Mat::zeros(3, 3);
        e1[(0, 0)] = 1.0;
        let (x, u, d) = rank_factor(&e1, 2, 1e-7).unwrap();
        assert_eq!(d, 1);
        assert_eq!(x.column(0).as_slice(), &[1.0, 0.0]);
        assert_eq!(u.column(0).as_slice(), &[0.0]);

        let eps = 1e-9;
        let q = Mat::from_diagonal(&Vector::from_vec(vec![1.0 - eps, eps]));
        assert_eq!(rank_factor(&q, 2, 1e-7).unwrap().2, 1);
        assert!(rank_factor(&Mat::zeros(2, 2), 2, 1e-7).is_err());
    }

    #[test]
    fn procrustes_examples() {
        let r = rot(PI / 2.0);
        let f = recover_orthogonal_factor(&Mat::identity(2, 2), &r).unwrap();
        assert!((f - &r).norm() < 1e-14);

        let x = from_row_major(1, 2, &[1.0, 0.0]);
        let g = from_row_major(1, 2, &[0.0, 1.0]);
        let f = recover_orthogonal_factor(&x, &g).unwrap();
        assert!((&x * &f - &g).norm() < 1e-14);
        assert!((f.transpose() * &f - Mat::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn groups_of_identity() {
        let g = eigen_group(&Mat::identity(2, 2), 1e-6).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].theta, 0.0);
        assert_eq!(g[0].multiplicity(), 2);
    }

    #[test]
    fn groups_of_quarter_rotation() {
        let g = eigen_group(&rot(PI / 2.0), 1e-6).unwrap();
        assert_eq!(g.len(), 2);
        assert!((g[0].theta - PI / 2.0).abs() < 1e-12);
        assert!((g[1].theta - 3.0 * PI / 2.0).abs() < 1e-12);
        assert!(g.iter().all(|x| x.multiplicity() == 1));
    }

    #[test]
    fn groups_of_reflection() {
        let f = Mat::from_diagonal(&Vector::from_vec(vec![1.0, -1.0]));
        let g = eigen_group(&f, 1e-6).unwrap();
        let thetas: Vec<f64> = g.iter().map(|x| x.theta).collect();
        assert_eq!(thetas, vec![0.0, PI]);
    }

    #[test]
    fn repeated_rotation_blocks_cluster() {
        let mut f = Mat::zeros(5, 5);
        f.view_mut((0, 0), (2, 2)).copy_from(&rot(0.7));
        f.view_mut((2, 2), (2, 2)).copy_from(&rot(0.7));
        f[(4, 4)] = 1.0;
        let g = eigen_group(&f, 1e-6).unwrap();
        let mult: Vec<usize> = g.iter().map(|x| x.multiplicity()).collect();
        assert_eq!(mult, vec![1, 2, 2]);
    }

    fn modes_for(x: Mat, u: Mat, f: Mat, h: Vec<Mat>) -> WorstCaseModes {
        let d = f.nrows();
        let groups = eigen_group(&f, 1e-6).unwrap();
        let xu = vstack(&x, &u);
        WorstCaseModes { q: &xu * xu.transpose(), d, x, u, f, groups, h, v: None }
    }

    #[test]
    fn simple_spectrum_gives_real_sum() {
        let modes = modes_for(Mat::identity(2, 2) / 2f64.sqrt(), Mat::zeros(0, 2), rot(PI / 2.0), vec![]);
        let tc = technical_condition(&modes, &SolverConfig::default());
        assert_eq!(tc.method, Some(TechnicalMethod::SimpleSpectrum));
        let v = tc.v.unwrap();
        assert!(v.norm() > 1.0);
    }

    #[test]
    fn opposite_signs_block_rank_one() {
        let one = Mat::from_element(1, 1, 1.0);
        let modes = modes_for(one.clone(), Mat::zeros(0, 1), one.clone(), vec![one.clone(), -one]);
        let tc = technical_condition(&modes, &SolverConfig::default());
        assert!(tc.v.is_none());
    }

    #[test]
    fn lower_bound_vanishes_for_one_group() {
        let modes = modes_for(Mat::identity(2, 2), Mat::zeros(0, 2), Mat::identity(2, 2), vec![Mat::identity(2, 2)]);
        assert_eq!(iqc_sum_lower_bound(&modes, &Vector::from_vec(vec![1.0, 0.0])), vec![0.0]);
    }

    #[test]
    fn gain_examples() {
        let modes = modes_for(Mat::from_element(1, 1, 2.0), Mat::from_element(1, 1, 3.0), Mat::identity(1, 1), vec![]);
        let k = feedback_gain(&modes, 1e-8).unwrap();
        assert!((k[(0, 0)] - 1.5).abs() < 1e-15);
        let deficient = modes_for(from_row_major(2, 2, &[1.0, 1.0, 1.0, 1.0]), Mat::zeros(1, 2), Mat::identity(2, 2), vec![]);
        assert!(feedback_gain(&deficient, 1e-8).is_none());
        let free = modes_for(Mat::identity(2, 2), Mat::zeros(0, 2), Mat::identity(2, 2), vec![]);
        assert_eq!(feedback_gain(&free, 1e-8).unwrap().shape(), (0, 2));
    }

    #[test]
    fn shift_examples() {
        let one = Mat::from_element(1, 1, 1.0);
        let v = Vector::from_element(1, 1.0);
        let pos = modes_for(one.clone(), Mat::zeros(0, 1), one.clone(), vec![one.clone()]);
        assert_eq!(hard_iqc_shift(&pos, &v, 10_000), Some(1));
        let neg = modes_for(one.clone(), Mat::zeros(0, 1), one.clone(), vec![-one]);
        assert_eq!(hard_iqc_shift(&neg, &v, 10_000), None);
    }

    #[test]
    fn pointwise_rule() {
        let one = Mat::from_element(1, 1, 1.0);
        let iqcs = IqcSet::new(1, vec![Mat::zeros(1, 1)]).unwrap();
        let m = modes_for(one.clone(), Mat::zeros(0, 1), one, vec![Mat::zeros(1, 1)]);
        assert!(pointwise_check(&m, &Vector::from_element(1, 1.0), &iqcs));
        let r = modes_for(Mat::identity(2, 2), Mat::zeros(0, 2), rot(PI / 2.0), vec![]);
        assert!(!pointwise_check(&r, &Vector::from_element(2, 1.0), &IqcSet::empty(2)));
    }

    #[test]
    fn rotation_pipeline() {
        let sys = SystemData::autonomous(from_row_major(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap();
        let out = worst_case(&sys, &IqcSet::empty(2), &WorstCaseOptions { horizon: 200, ..Default::default() }).unwrap();
        let WorstCaseOutcome::Witness(w) = out else { panic!("expected a witness: {out:?}") };
        let norms = w.trajectory.state_norms();
        assert!(norms.iter().all(|x| (x - norms[0]).abs() < 1e-9));
        assert!(norms[0] > 0.0);
    }

    #[test]
    fn contraction_stops_at_precheck() {
        let sys = SystemData::autonomous(Mat::from_element(1, 1, 0.5)).unwrap();
        let out = worst_case(&sys, &IqcSet::empty(1), &WorstCaseOptions::default()).unwrap();
        assert!(matches!(out, WorstCaseOutcome::NoWitness(NoWitness { stage: Stage::RadiusPrecheck, .. })));
    }
}
