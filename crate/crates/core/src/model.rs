//! Systems `x_{k+1} = A x_k + B u_k`, static IQCs on the stacked signal
//! `[x_k; u_k]`, trajectories, and the (ρ-weighted) Lyapunov operator pair.

use log::warn;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, hstack, sym, vcat, Mat, Vector};

/// Plant matrices `(A, B)`. `B` may have zero columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemData {
    a: Mat,
    b: Mat,
}

impl SystemData {
    pub fn new(a: Mat, b: Mat) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::InvalidArgument { arg: "A", reason: "state dimension must be at least 1".into() });
        }
        if a.ncols() != n {
            return Err(Error::dims("A", (n, n), a.shape()));
        }
        if b.nrows() != n {
            return Err(Error::dims("B", (n, b.ncols()), b.shape()));
        }
        if !all_finite(&a) {
            return Err(Error::NonFinite { operand: "A" });
        }
        if !all_finite(&b) {
            return Err(Error::NonFinite { operand: "B" });
        }
        Ok(Self { a, b })
    }

    /// Autonomous system (`m = 0`).
    pub fn autonomous(a: Mat) -> Result<Self> {
        let n = a.nrows();
        Self::new(a, Mat::zeros(n, 0))
    }

    pub fn from_row_major(n: usize, m: usize, a: &[f64], b: &[f64]) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::DimensionMismatch {
                operand: "A",
                expected: format!("{} entries", n * n),
                found: format!("{} entries", a.len()),
            });
        }
        if b.len() != n * m {
            return Err(Error::DimensionMismatch {
                operand: "B",
                expected: format!("{} entries", n * m),
                found: format!("{} entries", b.len()),
            });
        }
        Self::new(Mat::from_row_slice(n, n, a), Mat::from_row_slice(n, m, b))
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self) -> &Mat {
        &self.b
    }

    /// `[A B]`
    pub fn ab(&self) -> Mat {
        hstack(&self.a, &self.b)
    }

    /// The pair `(A/ρ, B/ρ)`, whose trajectories are the ρ-weighted ones.
    pub fn scaled(&self, rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::InvalidArgument { arg: "rho", reason: format!("must be positive, got {rho}") });
        }
        Self::new(&self.a / rho, &self.b / rho)
    }

    pub fn step(&self, x: &Vector, u: &Vector) -> Vector {
        &self.a * x + &self.b * u
    }
}

/// Finite ordered family of symmetric `(n+m)×(n+m)` IQC matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct IqcSet {
    dim: usize,
    entries: Vec<Mat>,
}

const ASYMMETRY_WARN: f64 = 1e-9;

impl IqcSet {
    pub fn empty(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    /// Builds the set, replacing every matrix by its symmetric part.
    pub fn new(dim: usize, entries: Vec<Mat>) -> Result<Self> {
        let mut out = Vec::with_capacity(entries.len());
        for (i, m) in entries.into_iter().enumerate() {
            if m.shape() != (dim, dim) {
                return Err(Error::DimensionMismatch {
                    operand: "iqcs",
                    expected: format!("{dim}x{dim}"),
                    found: format!("{}x{} at index {i}", m.nrows(), m.ncols()),
                });
            }
            if !all_finite(&m) {
                return Err(Error::NonFinite { operand: "iqcs" });
            }
            let skew = (&m - m.transpose()).norm();
            let scale = m.norm().max(f64::MIN_POSITIVE);
            if skew > ASYMMETRY_WARN * scale {
                warn!("IQC {i} is not symmetric (relative asymmetry {:.3e}); using its symmetric part", skew / scale);
            }
            out.push(sym(&m));
        }
        Ok(Self { dim, entries: out })
    }

    pub fn for_system(sys: &SystemData, entries: Vec<Mat>) -> Result<Self> {
        Self::new(sys.n() + sys.m(), entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Mat> {
        self.entries.iter()
    }

    pub fn get(&self, i: usize) -> Option<&Mat> {
        self.entries.get(i)
    }

    pub fn matrices(&self) -> &[Mat] {
        &self.entries
    }

    pub fn check_system(&self, sys: &SystemData) -> Result<()> {
        let want = sys.n() + sys.m();
        if self.dim != want {
            return Err(Error::DimensionMismatch {
                operand: "iqcs",
                expected: format!("{want}x{want}"),
                found: format!("{0}x{0}", self.dim),
            });
        }
        Ok(())
    }

    /// `Σ λᵢ Mᵢ`
    pub fn combine(&self, lambdas: &[f64]) -> Mat {
        let mut out = Mat::zeros(self.dim, self.dim);
        for (m, &l) in self.entries.iter().zip(lambdas) {
            out += m * l;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Simulated,
    ModeGenerated,
}

/// `x_0..x_N` together with `u_0..u_{N-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<Vector>,
    inputs: Vec<Vector>,
    provenance: Provenance,
}

impl Trajectory {
    pub fn new(states: Vec<Vector>, inputs: Vec<Vector>, provenance: Provenance) -> Result<Self> {
        if states.len() != inputs.len() + 1 {
            return Err(Error::DimensionMismatch {
                operand: "trajectory",
                expected: format!("{} states", inputs.len() + 1),
                found: format!("{} states", states.len()),
            });
        }
        let n = states[0].len();
        if states.iter().any(|x| x.len() != n) {
            return Err(Error::InvalidArgument { arg: "states", reason: "ragged state vectors".into() });
        }
        if let Some(m) = inputs.first().map(|u| u.len()) {
            if inputs.iter().any(|u| u.len() != m) {
                return Err(Error::InvalidArgument { arg: "inputs", reason: "ragged input vectors".into() });
            }
        }
        Ok(Self { states, inputs, provenance })
    }

    pub fn states(&self) -> &[Vector] {
        &self.states
    }

    pub fn inputs(&self) -> &[Vector] {
        &self.inputs
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Number of steps `N` (inputs).
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// `[x_k; u_k]` for `k < N`.
    pub fn stacked(&self, k: usize) -> Vector {
        vcat(&self.states[k], &self.inputs[k])
    }

    pub fn state_norms(&self) -> Vec<f64> {
        self.states.iter().map(|x| x.norm()).collect()
    }
}

/// Value of `zᵀ M z` for a stacked vector `z = [x; u]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct QuadraticForm(pub f64);

impl QuadraticForm {
    pub fn eval(m: &Mat, z: &Vector) -> Self {
        QuadraticForm((m * z).dot(z))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

fn check_square(operand: &'static str, m: &Mat, n: usize) -> Result<()> {
    if m.shape() != (n, n) {
        return Err(Error::dims(operand, (n, n), m.shape()));
    }
    Ok(())
}

/// ρ-weighted Lyapunov operator
/// `P ↦ [AᵀPA − ρ²P, AᵀPB; BᵀPA, BᵀPB]`.
pub fn lyapunov_operator(p: &Mat, sys: &SystemData, rho: f64) -> Result<Mat> {
    check_square("P", p, sys.n())?;
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument { arg: "rho", reason: format!("must be positive, got {rho}") });
    }
    Ok(lyapunov_operator_unchecked(p, sys, rho))
}

pub(crate) fn lyapunov_operator_unchecked(p: &Mat, sys: &SystemData, rho: f64) -> Mat {
    let n = sys.n();
    let ab = sys.ab();
    let mut out = ab.transpose() * p * &ab;
    let mut tl = out.view_mut((0, 0), (n, n));
    tl -= p * (rho * rho);
    sym(&out)
}

/// Adjoint of the unweighted operator: `[A B] Q [A B]ᵀ − [I 0] Q [I 0]ᵀ`.
pub fn lyapunov_adjoint(q: &Mat, sys: &SystemData) -> Result<Mat> {
    lyapunov_adjoint_weighted(q, sys, 1.0)
}

/// Adjoint of the ρ-weighted operator: `[A B] Q [A B]ᵀ − ρ² [I 0] Q [I 0]ᵀ`.
pub fn lyapunov_adjoint_weighted(q: &Mat, sys: &SystemData, rho: f64) -> Result<Mat> {
    check_square("Q", q, sys.n() + sys.m())?;
    Ok(lyapunov_adjoint_unchecked(q, sys, rho))
}

pub(crate) fn lyapunov_adjoint_unchecked(q: &Mat, sys: &SystemData, rho: f64) -> Mat {
    let n = sys.n();
    let ab = sys.ab();
    let out = &ab * q * ab.transpose() - q.view((0, 0), (n, n)) * (rho * rho);
    sym(&out)
}

fn check_trajectory(traj: &Trajectory, n: usize, m: usize) -> Result<()> {
    if traj.states[0].len() != n {
        return Err(Error::DimensionMismatch {
            operand: "trajectory states",
            expected: format!("length {n}"),
            found: format!("length {}", traj.states[0].len()),
        });
    }
    if let Some(u) = traj.inputs.first() {
        if u.len() != m {
            return Err(Error::DimensionMismatch {
                operand: "trajectory inputs",
                expected: format!("length {m}"),
                found: format!("length {}", u.len()),
            });
        }
    }
    Ok(())
}

/// `S_i(N) = Σ_{k<N} [x_k; u_k]ᵀ M_i [x_k; u_k]` for `N = 1..=len`, one row per IQC.
pub fn iqc_partial_sums(traj: &Trajectory, iqcs: &IqcSet) -> Result<Vec<Vec<f64>>> {
    let n = traj.states[0].len();
    if iqcs.dim() < n {
        return Err(Error::DimensionMismatch {
            operand: "iqcs",
            expected: format!("dimension at least {n}"),
            found: format!("{}", iqcs.dim()),
        });
    }
    check_trajectory(traj, n, iqcs.dim() - n)?;
    let mut out = vec![Vec::with_capacity(traj.len()); iqcs.len()];
    let mut acc = vec![0.0; iqcs.len()];
    for k in 0..traj.len() {
        let z = traj.stacked(k);
        for (i, m) in iqcs.iter().enumerate() {
            acc[i] += QuadraticForm::eval(m, &z).value();
            out[i].push(acc[i]);
        }
    }
    Ok(out)
}

/// Runs the recursion from `x0` under the given inputs.
pub fn simulate(sys: &SystemData, x0: &Vector, inputs: &[Vector]) -> Result<Trajectory> {
    if x0.len() != sys.n() {
        return Err(Error::DimensionMismatch {
            operand: "x0",
            expected: format!("length {}", sys.n()),
            found: format!("length {}", x0.len()),
        });
    }
    if let Some((k, u)) = inputs.iter().enumerate().find(|(_, u)| u.len() != sys.m()) {
        return Err(Error::DimensionMismatch {
            operand: "inputs",
            expected: format!("length {}", sys.m()),
            found: format!("length {} at step {k}", u.len()),
        });
    }
    let mut states = Vec::with_capacity(inputs.len() + 1);
    states.push(x0.clone());
    for u in inputs {
        let next = sys.step(states.last().expect("non-empty"), u);
        states.push(next);
    }
    Trajectory::new(states, inputs.to_vec(), Provenance::Simulated)
}

/// Zero inputs of the right width, for autonomous runs.
pub fn zero_inputs(sys: &SystemData, steps: usize) -> Vec<Vector> {
    vec![Vector::zeros(sys.m()); steps]
}
