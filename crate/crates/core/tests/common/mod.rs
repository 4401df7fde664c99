//! Instance generators shared by the integration tests.
#![allow(dead_code)]

use iqc_radius::dynamic_iqc::{IqcFilter, PlantData};
use iqc_radius::linalg::{hstack, null_space, pinv, spectral_radius, sym, vstack, Mat};
use iqc_radius::model::{lyapunov_operator, IqcSet, SystemData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    // Sum of uniforms is close enough to normal for generating instances.
    Mat::from_fn(r, c, |_, _| (0..4).map(|_| rng.gen_range(-1.0..1.0)).sum::<f64>() * 0.5)
}

pub fn spd(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let g = gaussian(rng, n, n);
    sym(&(&g * g.transpose())) + Mat::identity(n, n)
}

pub fn rotation(theta: f64) -> Mat {
    let (s, c) = theta.sin_cos();
    Mat::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Block-diagonal orthogonal matrix: one rotation per angle, then `±1` entries.
pub fn orthogonal(angles: &[f64], signs: &[f64]) -> Mat {
    let d = 2 * angles.len() + signs.len();
    let mut f = Mat::zeros(d, d);
    for (k, t) in angles.iter().enumerate() {
        f.view_mut((2 * k, 2 * k), (2, 2)).copy_from(&rotation(*t));
    }
    for (k, s) in signs.iter().enumerate() {
        let i = 2 * angles.len() + k;
        f[(i, i)] = *s;
    }
    f
}

/// A system at radius exactly one with `iqcs` IQCs, each certifying on its own,
/// and periodic modes `[X; U]Fᵏ` that satisfy `AX + BU = XF`.
pub struct UnitInstance {
    pub sys: SystemData,
    pub iqcs: IqcSet,
    pub x: Mat,
    pub u: Mat,
    pub f: Mat,
}

pub fn unit_instance(seed: u64, n: usize, m: usize, f: Mat, iqcs: usize) -> UnitInstance {
    let mut r = rng(seed);
    let d = f.nrows();
    let x = gaussian(&mut r, n, d);
    let u = gaussian(&mut r, m, d);
    let b = gaussian(&mut r, n, m);
    let xp = pinv(&x, 1e-12);
    let comp = Mat::identity(n, n) - &x * &xp;
    let a = (&x * &f - &b * &u) * &xp + gaussian(&mut r, n, n) * 0.3 * comp;
    let sys = SystemData::new(a, b).unwrap();
    let z = vstack(&x, &u);
    // S vanishes on range([X; U]) and is positive on its complement.
    let w = null_space(&z.transpose(), 1e-12);
    let ms = (0..iqcs)
        .map(|_| {
            let p = spd(&mut r, n);
            let g = gaussian(&mut r, w.ncols(), w.ncols());
            let s = &w * (sym(&(&g * g.transpose())) + Mat::identity(w.ncols(), w.ncols())) * w.transpose();
            sym(&(-lyapunov_operator(&p, &sys, 1.0).unwrap() - s))
        })
        .collect();
    let iqcs = IqcSet::for_system(&sys, ms).unwrap();
    UnitInstance { sys, iqcs, x, u, f }
}

/// The standard family used by the witness tests.
pub fn unit_instances() -> Vec<UnitInstance> {
    vec![
        unit_instance(11, 3, 1, orthogonal(&[0.7], &[]), 1),
        unit_instance(12, 4, 2, orthogonal(&[1.9], &[]), 2),
        unit_instance(13, 4, 1, orthogonal(&[2.3], &[1.0]), 2),
        unit_instance(14, 3, 1, orthogonal(&[], &[-1.0]), 1),
    ]
}

pub fn hcat(a: &Mat, b: &Mat) -> Mat {
    hstack(a, b)
}

/// Gradient descent `x⁺ = x − α∇f(x)` on `m_f`-strongly convex, `L`-smooth
/// scalar functions, with the sector IQC on `(x, ∇f(x))`.
pub fn gradient_descent(alpha: f64, mf: f64, l: f64) -> (SystemData, IqcSet) {
    let sys = SystemData::from_row_major(1, 1, &[1.0], &[-alpha]).unwrap();
    let m = Mat::from_row_slice(2, 2, &[-2.0 * mf * l, mf + l, mf + l, -2.0]);
    let iqcs = IqcSet::for_system(&sys, vec![m]).unwrap();
    (sys, iqcs)
}

/// Heavy-ball iteration on the state `[x_k; x_{k−1}]` with the same sector IQC.
pub fn heavy_ball(alpha: f64, beta: f64, mf: f64, l: f64) -> (SystemData, IqcSet) {
    let sys = SystemData::from_row_major(2, 1, &[1.0 + beta, -beta, 1.0, 0.0], &[-alpha, 0.0]).unwrap();
    let mut m = Mat::zeros(3, 3);
    m[(0, 0)] = -2.0 * mf * l;
    m[(0, 2)] = mf + l;
    m[(2, 0)] = mf + l;
    m[(2, 2)] = -2.0;
    let iqcs = IqcSet::for_system(&sys, vec![m]).unwrap();
    (sys, iqcs)
}

/// Matrix with singular values spread over `[lo, hi]`.
pub fn conditioned(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Mat {
    let basis = |rng: &mut ChaCha8Rng| {
        let g = gaussian(rng, n, n);
        iqc_radius::linalg::sym_eigen_desc(&sym(&(&g + g.transpose()))).1
    };
    let u = basis(rng);
    let v = basis(rng);
    let s = Mat::from_fn(n, n, |i, j| if i == j { lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64 } else { 0.0 });
    u * s * v.transpose()
}

/// Instance on which both the margin program and its dual are strictly
/// feasible with bounded optimal sets at `rho = 0.4`.
pub fn duality_instance(seed: u64) -> (SystemData, IqcSet) {
    let mut r = rng(900 + seed);
    let n = 2 + (seed as usize % 3);
    let m = seed as usize % 3;
    let a = conditioned(&mut r, n, 0.6, 1.4);
    let b = gaussian(&mut r, n, m);
    let sys = SystemData::new(a, b).unwrap();
    let k = n + m;
    let h = gaussian(&mut r, k, k);
    let iq = sym(&(&h * h.transpose())) + Mat::identity(k, k) * 0.1;
    let iqcs = IqcSet::for_system(&sys, vec![iq]).unwrap();
    (sys, iqcs)
}

/// Scaled to the given eigenvalue radius.
fn stable(r: &mut ChaCha8Rng, n: usize, target: f64) -> Mat {
    let a = gaussian(r, n, n);
    let s = spectral_radius(&a);
    if s > 0.0 {
        a * (target / s)
    } else {
        a
    }
}

pub fn random_plant(r: &mut ChaCha8Rng, n: usize, m: usize, p: usize) -> PlantData {
    PlantData::new(stable(r, n, 0.95), gaussian(r, n, m), gaussian(r, p, n), gaussian(r, p, m)).unwrap()
}

pub fn random_filter(r: &mut ChaCha8Rng, npsi: usize, q: usize, p: usize, m: usize) -> IqcFilter {
    let g = gaussian(r, q, q);
    IqcFilter {
        a_psi: stable(r, npsi, 0.9),
        b_psi1: gaussian(r, npsi, p),
        b_psi2: gaussian(r, npsi, m),
        c_psi: gaussian(r, q, npsi),
        d_psi1: gaussian(r, q, p),
        d_psi2: gaussian(r, q, m),
        m: sym(&(&g + g.transpose())),
    }
}
