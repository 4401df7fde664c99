//! Infeasible-start primal-dual path-following method (HKM search direction,
//! Mehrotra predictor-corrector) for the standard conic pair
//!
//! ```text
//! (P)  min ⟨C, X⟩  s.t. ⟨A_k, X⟩ = b_k,            X ∈ K
//! (D)  max bᵀy     s.t. Z = C − Σ y_k A_k,          Z ∈ K
//! ```
//!
//! where `K` is a product of PSD cones and nonnegative orthants. Orthant
//! blocks are stored as `n×1` columns.

use nalgebra::Cholesky;

use super::{SolverConfig, SolverStatus};
use crate::linalg::{sym, Mat, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Cone {
    Psd(usize),
    Nonneg(usize),
}

impl Cone {
    fn dim(self) -> usize {
        match self {
            Cone::Psd(n) | Cone::Nonneg(n) => n,
        }
    }

    fn shape(self) -> (usize, usize) {
        match self {
            Cone::Psd(n) => (n, n),
            Cone::Nonneg(n) => (n, 1),
        }
    }
}

pub(crate) type Blocks = Vec<Mat>;

#[derive(Clone, Debug)]
pub(crate) struct ConicProblem {
    pub cones: Vec<Cone>,
    pub c: Blocks,
    /// `a[k][j]`: block `j` of constraint matrix `A_k`.
    pub a: Vec<Blocks>,
    pub b: Vector,
}

#[derive(Clone, Debug)]
pub(crate) struct ConicResult {
    pub status: SolverStatus,
    pub x: Blocks,
    pub y: Vector,
    pub pobj: f64,
    pub dobj: f64,
    /// Relative residual of the equality side `‖b − A(X)‖ / (1 + ‖b‖)`.
    pub pinf: f64,
    pub rel_gap: f64,
    pub iterations: usize,
}

fn blocks_inner(x: &Blocks, y: &Blocks) -> f64 {
    x.iter().zip(y).map(|(a, b)| a.dot(b)).sum()
}

fn block_norm2(cone: Cone, m: &Mat) -> f64 {
    match cone {
        Cone::Psd(0) | Cone::Nonneg(0) => 0.0,
        Cone::Psd(_) => m.clone().symmetric_eigenvalues().amax(),
        Cone::Nonneg(_) => m.amax(),
    }
}

impl ConicProblem {
    fn nu(&self) -> f64 {
        self.cones.iter().map(|c| c.dim()).sum::<usize>() as f64
    }

    fn apply_a(&self, x: &Blocks) -> Vector {
        Vector::from_iterator(self.a.len(), self.a.iter().map(|ak| blocks_inner(ak, x)))
    }

    fn apply_at(&self, y: &Vector) -> Blocks {
        let mut out: Blocks = self.cones.iter().map(|c| Mat::zeros(c.shape().0, c.shape().1)).collect();
        for (k, ak) in self.a.iter().enumerate() {
            if y[k] != 0.0 {
                for (o, akj) in out.iter_mut().zip(ak) {
                    *o += akj * y[k];
                }
            }
        }
        out
    }

    fn initial_point(&self) -> (Blocks, Vector, Blocks) {
        let mut x = Vec::with_capacity(self.cones.len());
        let mut z = Vec::with_capacity(self.cones.len());
        for (j, &cone) in self.cones.iter().enumerate() {
            let n = cone.dim().max(1) as f64;
            let mut xi: f64 = 10.0f64.max(n.sqrt());
            let mut eta: f64 = 10.0f64.max(n.sqrt());
            let mut amax: f64 = 0.0;
            for (k, ak) in self.a.iter().enumerate() {
                let na = ak[j].norm();
                xi = xi.max(n * (1.0 + self.b[k].abs()) / (1.0 + na));
                amax = amax.max(na);
            }
            eta = eta.max((1.0 + amax.max(self.c[j].norm())) / n.sqrt());
            let (r, c) = cone.shape();
            match cone {
                Cone::Psd(_) => {
                    x.push(Mat::identity(r, c) * xi);
                    z.push(Mat::identity(r, c) * eta);
                }
                Cone::Nonneg(_) => {
                    x.push(Mat::from_element(r, c, xi));
                    z.push(Mat::from_element(r, c, eta));
                }
            }
        }
        (x, Vector::zeros(self.a.len()), z)
    }
}

/// Largest `α` with `x + α dx` in the cone (`+∞` when unrestricted).
fn max_step(cone: Cone, x: &Mat, dx: &Mat) -> Option<f64> {
    match cone {
        Cone::Psd(0) | Cone::Nonneg(0) => Some(f64::INFINITY),
        Cone::Psd(_) => {
            let l = Cholesky::new(sym(x))?.l();
            let li_dx = l.solve_lower_triangular(dx)?;
            let w = l.solve_lower_triangular(&li_dx.transpose())?;
            let lmin = sym(&w).symmetric_eigenvalues().min();
            Some(if lmin >= 0.0 { f64::INFINITY } else { -1.0 / lmin })
        }
        Cone::Nonneg(_) => {
            let mut a = f64::INFINITY;
            for (xi, di) in x.iter().zip(dx.iter()) {
                if *di < 0.0 {
                    a = a.min(-xi / di);
                }
            }
            Some(a)
        }
    }
}

struct Direction {
    dx: Blocks,
    dy: Vector,
    dz: Blocks,
}

struct Workspace<'a> {
    prob: &'a ConicProblem,
    zinv: Blocks,
    /// Schur complement `M_kl = ⟨A_k, X A_l Z⁻¹⟩`.
    schur: Cholesky<f64, nalgebra::Dyn>,
}

impl<'a> Workspace<'a> {
    fn new(prob: &'a ConicProblem, x: &Blocks, z: &Blocks) -> Option<Self> {
        let mut zinv = Vec::with_capacity(z.len());
        for (&cone, zj) in prob.cones.iter().zip(z) {
            zinv.push(match cone {
                Cone::Psd(0) | Cone::Nonneg(0) => zj.clone(),
                Cone::Psd(_) => sym(&Cholesky::new(sym(zj))?.inverse()),
                Cone::Nonneg(_) => {
                    if zj.iter().any(|v| *v <= 0.0) {
                        return None;
                    }
                    zj.map(|v| 1.0 / v)
                }
            });
        }
        let kk = prob.a.len();
        // G_l = X A_l Z⁻¹ per block.
        let g: Vec<Blocks> = prob
            .a
            .iter()
            .map(|al| {
                prob.cones
                    .iter()
                    .enumerate()
                    .map(|(j, &cone)| match cone {
                        Cone::Psd(_) => &x[j] * &al[j] * &zinv[j],
                        Cone::Nonneg(_) => x[j].component_mul(&al[j]).component_mul(&zinv[j]),
                    })
                    .collect()
            })
            .collect();
        let mut m = Mat::zeros(kk, kk);
        for k in 0..kk {
            for l in k..kk {
                let v = blocks_inner(&prob.a[k], &g[l]);
                m[(k, l)] = v;
                m[(l, k)] = v;
            }
        }
        if !m.iter().all(|v| v.is_finite()) {
            return None;
        }
        let schur = match Cholesky::new(m.clone()) {
            Some(c) => c,
            None => {
                let scale = m.diagonal().amax().max(1.0);
                let mut reg = 1e-14 * scale;
                loop {
                    let shifted = &m + Mat::identity(kk, kk) * reg;
                    if let Some(c) = Cholesky::new(shifted) {
                        break c;
                    }
                    reg *= 100.0;
                    if reg > 1e-4 * scale {
                        return None;
                    }
                }
            }
        };
        Some(Self { prob, zinv, schur })
    }

    /// Newton direction for the complementarity target `σμ I − XZ − corr`.
    fn direction(
        &self,
        x: &Blocks,
        rp: &Vector,
        rd: &Blocks,
        sigma_mu: f64,
        corr: Option<&Direction>,
    ) -> Direction {
        let prob = self.prob;
        // T = σμ Z⁻¹ − X − dXa dZa Z⁻¹ (the complementarity target times Z⁻¹).
        let mut t: Blocks = Vec::with_capacity(x.len());
        let mut rhs_blocks: Blocks = Vec::with_capacity(x.len());
        for (j, &cone) in prob.cones.iter().enumerate() {
            let (tj, xrz) = match cone {
                Cone::Psd(_) => {
                    let mut tj = &self.zinv[j] * sigma_mu - &x[j];
                    if let Some(c) = corr {
                        tj -= &c.dx[j] * &c.dz[j] * &self.zinv[j];
                    }
                    let xrz = &x[j] * &rd[j] * &self.zinv[j];
                    (tj, xrz)
                }
                Cone::Nonneg(_) => {
                    let mut tj = &self.zinv[j] * sigma_mu - &x[j];
                    if let Some(c) = corr {
                        tj -= c.dx[j].component_mul(&c.dz[j]).component_mul(&self.zinv[j]);
                    }
                    let xrz = x[j].component_mul(&rd[j]).component_mul(&self.zinv[j]);
                    (tj, xrz)
                }
            };
            rhs_blocks.push(&tj - xrz);
            t.push(tj);
        }
        let rhs = rp - prob.apply_a(&rhs_blocks);
        let dy = self.schur.solve(&rhs);
        let at_dy = prob.apply_at(&dy);
        let dz: Blocks = rd.iter().zip(&at_dy).map(|(r, a)| r - a).collect();
        let dx: Blocks = prob
            .cones
            .iter()
            .enumerate()
            .map(|(j, &cone)| match cone {
                Cone::Psd(_) => sym(&(&t[j] - &x[j] * &dz[j] * &self.zinv[j])),
                Cone::Nonneg(_) => &t[j] - x[j].component_mul(&dz[j]).component_mul(&self.zinv[j]),
            })
            .collect();
        Direction { dx, dy, dz }
    }
}

fn step_lengths(prob: &ConicProblem, x: &Blocks, z: &Blocks, d: &Direction) -> Option<(f64, f64)> {
    let mut ap = f64::INFINITY;
    let mut ad = f64::INFINITY;
    for (j, &cone) in prob.cones.iter().enumerate() {
        ap = ap.min(max_step(cone, &x[j], &d.dx[j])?);
        ad = ad.min(max_step(cone, &z[j], &d.dz[j])?);
    }
    Some((ap, ad))
}

pub(crate) fn solve(prob: &ConicProblem, cfg: &SolverConfig) -> ConicResult {
    let nu = prob.nu().max(1.0);
    let (mut x, mut y, mut z) = prob.initial_point();
    let norm_b = prob.b.norm();
    let c_norms: Vec<f64> = prob.cones.iter().zip(&prob.c).map(|(&k, c)| block_norm2(k, c)).collect();
    let mut stalled = 0usize;

    let mut iter = 0usize;
    loop {
        let ax = prob.apply_a(&x);
        let rp = &prob.b - &ax;
        let at_y = prob.apply_at(&y);
        let rd: Blocks = prob.c.iter().zip(&at_y).zip(&z).map(|((c, a), z)| c - a - z).collect();
        let pobj = blocks_inner(&prob.c, &x);
        let dobj = prob.b.dot(&y);
        let pinf = rp.norm() / (1.0 + norm_b);
        let dinf = prob
            .cones
            .iter()
            .zip(&rd)
            .zip(&c_norms)
            .map(|((&k, r), cn)| block_norm2(k, r) / (1.0 + cn))
            .fold(0.0, f64::max);
        let rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        log::trace!("it={iter} pobj={pobj:.6e} dobj={dobj:.6e} pinf={pinf:.2e} dinf={dinf:.2e} gap={rel_gap:.2e}");

        let result = |status, x: Blocks, y: Vector| ConicResult {
            status,
            x,
            y,
            pobj,
            dobj,
            pinf,
            rel_gap,
            iterations: iter,
        };

        if pinf <= cfg.feasibility_tol && dinf <= cfg.feasibility_tol && rel_gap <= cfg.gap_tol {
            return result(SolverStatus::Optimal, x, y);
        }

        // Farkas rays: a growing dual objective with A*(y) + Z → 0 relative to it
        // certifies (P) empty; a decreasing primal objective with A(X) → 0
        // certifies (D) empty.
        if dobj > 0.0 {
            let atyz: Blocks = at_y.iter().zip(&z).map(|(a, z)| a + z).collect();
            let ray = blocks_inner(&atyz, &atyz).sqrt() / dobj;
            if ray <= cfg.feasibility_tol && dinf <= cfg.feasibility_tol.sqrt() {
                return result(SolverStatus::Unbounded, x, y);
            }
        }
        if pobj < 0.0 {
            let ray = ax.norm() / -pobj;
            if ray <= cfg.feasibility_tol && pinf <= cfg.feasibility_tol.sqrt() {
                return result(SolverStatus::Infeasible, x, y);
            }
        }

        if iter >= cfg.max_iterations {
            return result(SolverStatus::IterationLimit, x, y);
        }

        let mu = blocks_inner(&x, &z) / nu;
        let Some(ws) = Workspace::new(prob, &x, &z) else {
            log::trace!("schur factorization failed");
            return result(SolverStatus::NumericalFailure, x, y);
        };

        let pred = ws.direction(&x, &rp, &rd, 0.0, None);
        let Some((ap_a, ad_a)) = step_lengths(prob, &x, &z, &pred) else {
            return result(SolverStatus::NumericalFailure, x, y);
        };
        let ap_a = ap_a.min(1.0);
        let ad_a = ad_a.min(1.0);
        let mut mu_aff = 0.0;
        for j in 0..x.len() {
            let xa = &x[j] + &pred.dx[j] * ap_a;
            let za = &z[j] + &pred.dz[j] * ad_a;
            mu_aff += xa.dot(&za);
        }
        mu_aff /= nu;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3).max(if ap_a.min(ad_a) < 0.1 { 0.3 } else { 0.0 });

        let corr = ws.direction(&x, &rp, &rd, sigma * mu, Some(&pred));
        let Some((ap, ad)) = step_lengths(prob, &x, &z, &corr) else {
            return result(SolverStatus::NumericalFailure, x, y);
        };
        let gamma = 0.9 + 0.09 * ap_a.min(ad_a);
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);

        if ap.max(ad) < 1e-10 {
            stalled += 1;
            if stalled > 3 {
                return result(SolverStatus::NumericalFailure, x, y);
            }
        } else {
            stalled = 0;
        }

        for j in 0..x.len() {
            x[j] += &corr.dx[j] * ap;
            z[j] += &corr.dz[j] * ad;
            if matches!(prob.cones[j], Cone::Psd(_)) {
                x[j] = sym(&x[j]);
                z[j] = sym(&z[j]);
            }
        }
        y += &corr.dy * ad;
        iter += 1;
    }
}
