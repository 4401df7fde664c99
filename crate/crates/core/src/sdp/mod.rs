//! Small dense semidefinite programs in LMI form.
//!
//! A problem declares scalar and symmetric-matrix variables, an affine
//! objective to minimize, affine LMIs `F(w) ⪰ 0`, affine equalities and
//! scalar inequalities `g(w) ≥ 0`. Symmetric variables are expanded into
//! their upper-triangular entries. Equalities are eliminated by a null-space
//! parametrization before the conic solve.

mod ipm;
pub mod margin;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg::{lambda_min, null_space, pinv, Mat, Vector};
use ipm::{Cone, ConicProblem};

pub use margin::{
    solve_margin_dual, solve_margin_pair, solve_margin_primal, MarginDual, MarginPair, MarginPrimal,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Optimal,
    /// The LMI constraints admit no point.
    Infeasible,
    /// The objective is unbounded below; the multiplier problem is infeasible.
    Unbounded,
    NumericalFailure,
    IterationLimit,
}

impl fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverStatus::Optimal => "optimal",
            SolverStatus::Infeasible => "infeasible",
            SolverStatus::Unbounded => "unbounded",
            SolverStatus::NumericalFailure => "numerical-failure",
            SolverStatus::IterationLimit => "iteration-limit",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub feasibility_tol: f64,
    pub gap_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { feasibility_tol: 1e-8, gap_tol: 1e-8, max_iterations: 200 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.feasibility_tol > 0.0) || !(self.gap_tol > 0.0) {
            return Err(crate::Error::InvalidArgument {
                arg: "solver",
                reason: "tolerances must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Handle to a declared variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Layout {
    Scalar { offset: usize },
    Symmetric { dim: usize, offset: usize },
}

/// Handle to an LMI constraint, used to read its multiplier.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LmiId(usize);

/// Handle to a scalar inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IneqId(usize);

/// `constant + Σ coeff · unknown` over the flattened unknowns.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AffineForm {
    pub constant: f64,
    pub coeffs: Vec<(usize, f64)>,
}

/// `constant + Σ unknown · matrix` over the flattened unknowns.
#[derive(Clone, Debug, PartialEq)]
pub struct LmiForm {
    pub constant: Mat,
    pub coeffs: Vec<(usize, Mat)>,
}

impl LmiForm {
    fn eval(&self, w: &Vector) -> Mat {
        let mut out = self.constant.clone();
        for (i, f) in &self.coeffs {
            out += f * w[*i];
        }
        out
    }
}

impl AffineForm {
    fn eval(&self, w: &Vector) -> f64 {
        self.constant + self.coeffs.iter().map(|(i, c)| c * w[*i]).sum::<f64>()
    }

    fn dense(&self, n: usize) -> Vector {
        let mut v = Vector::zeros(n);
        for (i, c) in &self.coeffs {
            v[*i] += c;
        }
        v
    }
}

enum LinTerm {
    Scalar(f64),
    Inner(Mat),
}

/// Scalar affine expression in the problem variables.
#[derive(Default)]
pub struct LinExpr {
    constant: f64,
    terms: Vec<(Var, LinTerm)>,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scalar(mut self, v: Var, coeff: f64) -> Self {
        self.terms.push((v, LinTerm::Scalar(coeff)));
        self
    }

    /// Adds `⟨C, V⟩` for a symmetric variable `V`.
    pub fn inner(mut self, v: Var, c: Mat) -> Self {
        self.terms.push((v, LinTerm::Inner(c)));
        self
    }
}

type LinearMap = Box<dyn Fn(&Mat) -> Mat>;

enum LmiTerm {
    Scalar(Mat),
    Map(LinearMap),
}

/// Affine symmetric-matrix expression `F0 + Σ terms`.
pub struct LmiExpr {
    dim: usize,
    constant: Mat,
    terms: Vec<(Var, LmiTerm)>,
}

impl LmiExpr {
    pub fn new(dim: usize) -> Self {
        Self { dim, constant: Mat::zeros(dim, dim), terms: Vec::new() }
    }

    pub fn constant(mut self, c: &Mat) -> Self {
        self.constant += c;
        self
    }

    /// Adds `s · F` for a scalar variable `s`.
    pub fn scalar(mut self, v: Var, f: Mat) -> Self {
        self.terms.push((v, LmiTerm::Scalar(f)));
        self
    }

    /// Adds `f(V)` for a symmetric variable `V` and a linear map `f`.
    pub fn map(mut self, v: Var, f: impl Fn(&Mat) -> Mat + 'static) -> Self {
        self.terms.push((v, LmiTerm::Map(Box::new(f))));
        self
    }
}

/// An LMI-form semidefinite program.
#[derive(Clone, Debug, Default)]
pub struct SdpProblem {
    layout: Vec<Layout>,
    unknowns: usize,
    objective: AffineForm,
    lmis: Vec<LmiForm>,
    equalities: Vec<AffineForm>,
    inequalities: Vec<AffineForm>,
}

fn sym_basis(dim: usize, a: usize, b: usize) -> Mat {
    let mut e = Mat::zeros(dim, dim);
    e[(a, b)] = 1.0;
    e[(b, a)] = 1.0;
    e
}

fn sym_pairs(dim: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..dim).flat_map(move |a| (a..dim).map(move |b| (a, b)))
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn scalar(&mut self) -> Var {
        self.layout.push(Layout::Scalar { offset: self.unknowns });
        self.unknowns += 1;
        Var(self.layout.len() - 1)
    }

    pub fn scalars(&mut self, count: usize) -> Vec<Var> {
        (0..count).map(|_| self.scalar()).collect()
    }

    pub fn symmetric(&mut self, dim: usize) -> Var {
        self.layout.push(Layout::Symmetric { dim, offset: self.unknowns });
        self.unknowns += dim * (dim + 1) / 2;
        Var(self.layout.len() - 1)
    }

    pub fn num_unknowns(&self) -> usize {
        self.unknowns
    }

    fn compile_lin(&self, e: LinExpr) -> AffineForm {
        let mut coeffs = Vec::new();
        for (v, t) in e.terms {
            match (self.layout[v.0], t) {
                (Layout::Scalar { offset }, LinTerm::Scalar(c)) => coeffs.push((offset, c)),
                (Layout::Symmetric { dim, offset }, LinTerm::Inner(c)) => {
                    assert_eq!(c.shape(), (dim, dim), "inner-product coefficient has the wrong size");
                    for (k, (a, b)) in sym_pairs(dim).enumerate() {
                        let w = if a == b { c[(a, a)] } else { c[(a, b)] + c[(b, a)] };
                        if w != 0.0 {
                            coeffs.push((offset + k, w));
                        }
                    }
                }
                _ => panic!("term kind does not match the variable kind"),
            }
        }
        AffineForm { constant: e.constant, coeffs }
    }

    pub fn minimize(&mut self, e: LinExpr) {
        self.objective = self.compile_lin(e);
    }

    pub fn add_lmi(&mut self, e: LmiExpr) -> LmiId {
        let dim = e.dim;
        let mut coeffs = Vec::new();
        for (v, t) in e.terms {
            match (self.layout[v.0], t) {
                (Layout::Scalar { offset }, LmiTerm::Scalar(f)) => {
                    assert_eq!(f.shape(), (dim, dim), "LMI coefficient has the wrong size");
                    coeffs.push((offset, crate::linalg::sym(&f)));
                }
                (Layout::Symmetric { dim: vd, offset }, LmiTerm::Map(f)) => {
                    for (k, (a, b)) in sym_pairs(vd).enumerate() {
                        let img = f(&sym_basis(vd, a, b));
                        assert_eq!(img.shape(), (dim, dim), "LMI map has the wrong output size");
                        if img.iter().any(|x| *x != 0.0) {
                            coeffs.push((offset + k, crate::linalg::sym(&img)));
                        }
                    }
                }
                _ => panic!("term kind does not match the variable kind"),
            }
        }
        self.lmis.push(LmiForm { constant: crate::linalg::sym(&e.constant), coeffs });
        LmiId(self.lmis.len() - 1)
    }

    /// `e = 0`
    pub fn add_equality(&mut self, e: LinExpr) {
        let f = self.compile_lin(e);
        self.equalities.push(f);
    }

    /// `e ≥ 0`
    pub fn add_inequality(&mut self, e: LinExpr) -> IneqId {
        let f = self.compile_lin(e);
        self.inequalities.push(f);
        IneqId(self.inequalities.len() - 1)
    }

    pub fn objective(&self) -> &AffineForm {
        &self.objective
    }

    pub fn lmis(&self) -> &[LmiForm] {
        &self.lmis
    }

    pub fn equalities(&self) -> &[AffineForm] {
        &self.equalities
    }

    pub fn inequalities(&self) -> &[AffineForm] {
        &self.inequalities
    }
}

/// Direction certifying infeasibility or unboundedness.
#[derive(Clone, Debug, PartialEq)]
pub enum Certificate {
    /// Normalized LMI and inequality multipliers `(Y_j, μ_r)` with
    /// `Σ ⟨Y_j, F_j(w)⟩ + Σ μ_r g_r(w) < 0` for every `w`.
    Infeasibility { lmi: Vec<Mat>, ineq: Vec<f64> },
    /// Direction in the flattened unknowns along which the objective decreases
    /// by one unit per unit step while every constraint stays satisfied.
    Ray(Vector),
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolverStatus,
    pub objective: f64,
    /// Objective of the multiplier problem (a lower bound at optimality).
    pub dual_objective: f64,
    /// Worst LMI/inequality violation of the returned point, measured in the
    /// spectral norm relative to `1 + ‖constant term‖`.
    pub primal_residual: f64,
    /// Relative equality residual of the multipliers.
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub certificate: Option<Certificate>,
    values: Vector,
    layout: Vec<Layout>,
    lmi_multipliers: Vec<Mat>,
    ineq_multipliers: Vec<f64>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolverStatus::Optimal
    }

    pub fn unknowns(&self) -> &Vector {
        &self.values
    }

    pub fn scalar(&self, v: Var) -> f64 {
        match self.layout[v.0] {
            Layout::Scalar { offset } => self.values[offset],
            Layout::Symmetric { .. } => panic!("variable is not scalar"),
        }
    }

    pub fn symmetric(&self, v: Var) -> Mat {
        unpack_symmetric(&self.layout, v, &self.values)
    }

    /// Value of a symmetric variable along the unboundedness ray, if any.
    pub fn ray_symmetric(&self, v: Var) -> Option<Mat> {
        match &self.certificate {
            Some(Certificate::Ray(r)) => Some(unpack_symmetric(&self.layout, v, r)),
            _ => None,
        }
    }

    pub fn ray_scalar(&self, v: Var) -> Option<f64> {
        match (&self.certificate, self.layout[v.0]) {
            (Some(Certificate::Ray(r)), Layout::Scalar { offset }) => Some(r[offset]),
            _ => None,
        }
    }

    pub fn lmi_multiplier(&self, id: LmiId) -> &Mat {
        &self.lmi_multipliers[id.0]
    }

    pub fn ineq_multiplier(&self, id: IneqId) -> f64 {
        self.ineq_multipliers[id.0]
    }
}

fn unpack_symmetric(layout: &[Layout], v: Var, values: &Vector) -> Mat {
    match layout[v.0] {
        Layout::Symmetric { dim, offset } => {
            let mut m = Mat::zeros(dim, dim);
            for (k, (a, b)) in sym_pairs(dim).enumerate() {
                m[(a, b)] = values[offset + k];
                m[(b, a)] = values[offset + k];
            }
            m
        }
        Layout::Scalar { .. } => panic!("variable is not symmetric"),
    }
}

/// Pluggable solver entry point.
pub trait SdpSolver {
    fn solve(&self, problem: &SdpProblem, config: &SolverConfig) -> SdpSolution;
}

/// The built-in dense interior-point method.
#[derive(Clone, Copy, Debug, Default)]
pub struct InteriorPoint;

pub fn solve(problem: &SdpProblem, config: &SolverConfig) -> SdpSolution {
    InteriorPoint.solve(problem, config)
}

struct Reduced {
    w0: Vector,
    basis: Mat,
    consts: Vec<Mat>,
}

impl SdpSolver for InteriorPoint {
    fn solve(&self, problem: &SdpProblem, config: &SolverConfig) -> SdpSolution {
        let nw = problem.unknowns;
        // Equalities: w = w0 + N y.
        let (w0, basis) = if problem.equalities.is_empty() {
            (Vector::zeros(nw), Mat::identity(nw, nw))
        } else {
            let q = problem.equalities.len();
            let mut e = Mat::zeros(q, nw);
            let mut f = Vector::zeros(q);
            for (r, eq) in problem.equalities.iter().enumerate() {
                e.set_row(r, &eq.dense(nw).transpose());
                f[r] = -eq.constant;
            }
            let w0 = pinv(&e, 1e-12) * &f;
            if (&e * &w0 - &f).norm() > 1e-9 * (1.0 + f.norm()) {
                return infeasible_equalities(problem, w0);
            }
            (w0, null_space(&e, 1e-12))
        };

        let k = basis.ncols();
        let mut cones = Vec::new();
        let mut c_blocks = Vec::new();
        let mut a_blocks: Vec<Vec<Mat>> = vec![Vec::new(); k];
        for lmi in &problem.lmis {
            let dim = lmi.constant.nrows();
            cones.push(Cone::Psd(dim));
            c_blocks.push(lmi.eval(&w0));
            let mut ak = vec![Mat::zeros(dim, dim); k];
            for (i, f) in &lmi.coeffs {
                for (col, a) in ak.iter_mut().enumerate() {
                    let nik = basis[(*i, col)];
                    if nik != 0.0 {
                        *a -= f * nik;
                    }
                }
            }
            for (col, a) in ak.into_iter().enumerate() {
                a_blocks[col].push(a);
            }
        }
        if !problem.inequalities.is_empty() {
            let r = problem.inequalities.len();
            cones.push(Cone::Nonneg(r));
            let mut c = Mat::zeros(r, 1);
            let mut ak = vec![Mat::zeros(r, 1); k];
            for (row, g) in problem.inequalities.iter().enumerate() {
                c[(row, 0)] = g.eval(&w0);
                let gn = basis.transpose() * g.dense(nw);
                for (col, a) in ak.iter_mut().enumerate() {
                    a[(row, 0)] = -gn[col];
                }
            }
            c_blocks.push(c);
            for (col, a) in ak.into_iter().enumerate() {
                a_blocks[col].push(a);
            }
        }
        let cobj = problem.objective.dense(nw);
        let b = -(basis.transpose() * &cobj);
        let conic = ConicProblem { cones, c: c_blocks, a: a_blocks, b };
        let reduced = Reduced { w0, basis, consts: conic.c.clone() };

        let res = ipm::solve(&conic, config);

        let w = &reduced.w0 + &reduced.basis * &res.y;
        let obj_shift = problem.objective.eval(&reduced.w0);
        let n_lmi = problem.lmis.len();
        let mut lmi_mult: Vec<Mat> = res.x.iter().take(n_lmi).cloned().collect();
        let mut ineq_mult: Vec<f64> =
            if problem.inequalities.is_empty() { Vec::new() } else { res.x[n_lmi].iter().copied().collect() };

        let certificate = match res.status {
            SolverStatus::Unbounded => Some(Certificate::Ray(&reduced.basis * &res.y / res.dobj)),
            SolverStatus::Infeasible => {
                let s = -1.0 / res.pobj;
                Some(Certificate::Infeasibility {
                    lmi: lmi_mult.iter().map(|m| m * s).collect(),
                    ineq: ineq_mult.iter().map(|m| m * s).collect(),
                })
            }
            _ => None,
        };
        if res.status == SolverStatus::Infeasible {
            let s = -1.0 / res.pobj;
            lmi_mult.iter_mut().for_each(|m| *m *= s);
            ineq_mult.iter_mut().for_each(|m| *m *= s);
        }

        SdpSolution {
            status: res.status,
            objective: problem.objective.eval(&w),
            dual_objective: obj_shift - res.pobj,
            primal_residual: primal_residual(problem, &reduced, &w),
            dual_residual: res.pinf,
            gap: res.rel_gap,
            iterations: res.iterations,
            certificate,
            values: w,
            layout: problem.layout.clone(),
            lmi_multipliers: lmi_mult,
            ineq_multipliers: ineq_mult,
        }
    }
}

fn primal_residual(problem: &SdpProblem, reduced: &Reduced, w: &Vector) -> f64 {
    let mut worst: f64 = 0.0;
    for (lmi, c) in problem.lmis.iter().zip(&reduced.consts) {
        let f = lmi.eval(w);
        if f.nrows() > 0 {
            let scale = 1.0 + c.clone().symmetric_eigenvalues().amax();
            worst = worst.max((-lambda_min(&f)).max(0.0) / scale);
        }
    }
    if !problem.inequalities.is_empty() {
        let c = &reduced.consts[problem.lmis.len()];
        let scale = 1.0 + c.amax();
        for g in &problem.inequalities {
            worst = worst.max((-g.eval(w)).max(0.0) / scale);
        }
    }
    for e in &problem.equalities {
        worst = worst.max(e.eval(w).abs() / (1.0 + e.constant.abs()));
    }
    worst
}

fn infeasible_equalities(problem: &SdpProblem, w0: Vector) -> SdpSolution {
    SdpSolution {
        status: SolverStatus::Infeasible,
        objective: f64::NAN,
        dual_objective: f64::NAN,
        primal_residual: f64::INFINITY,
        dual_residual: f64::NAN,
        gap: f64::NAN,
        iterations: 0,
        certificate: None,
        values: w0,
        layout: problem.layout.clone(),
        lmi_multipliers: problem.lmis.iter().map(|l| Mat::zeros(l.constant.nrows(), l.constant.ncols())).collect(),
        ineq_multipliers: vec![0.0; problem.inequalities.len()],
    }
}
