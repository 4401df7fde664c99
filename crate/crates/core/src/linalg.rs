//! Small dense helpers on top of nalgebra shared by every module.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn sym(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Frobenius inner product `trace(aᵀ b)`.
pub fn inner(a: &Mat, b: &Mat) -> f64 {
    a.dot(b)
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(sym(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn lambda_min(m: &Mat) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

pub fn lambda_max(m: &Mat) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(f64::NEG_INFINITY)
}

/// Symmetric eigendecomposition sorted by descending eigenvalue, with each
/// eigenvector's largest-magnitude entry made positive so results are
/// reproducible.
pub fn sym_eigen_desc(m: &Mat) -> (Vec<f64>, Mat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), Mat::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(sym(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut vecs = Mat::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (col, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        let pivot = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v = -v;
        }
        vecs.set_column(col, &v);
        vals.push(eig.eigenvalues[i]);
    }
    (vals, vecs)
}

/// Thin singular value decomposition `m = U diag(s) Vᵀ` with `s` descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v_t: Mat,
}

impl Svd {
    fn residual(&self, m: &Mat) -> f64 {
        let k = self.s.len();
        let sig = Mat::from_fn(k, k, |i, j| if i == j { self.s[i] } else { 0.0 });
        let orth = |q: &Mat| (q.transpose() * q - Mat::identity(q.ncols(), q.ncols())).amax();
        (&self.u * sig * &self.v_t - m).amax().max(orth(&self.u) * (1.0 + m.amax())).max(orth(&self.v_t.transpose()) * (1.0 + m.amax()))
    }

    fn sorted(mut self) -> Self {
        let k = self.s.len();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| self.s[j].total_cmp(&self.s[i]).then(i.cmp(&j)));
        let u = Mat::from_fn(self.u.nrows(), k, |r, c| self.u[(r, order[c])]);
        let v_t = Mat::from_fn(k, self.v_t.ncols(), |r, c| self.v_t[(order[r], c)]);
        self.s = order.iter().map(|&i| self.s[i]).collect();
        self.u = u;
        self.v_t = v_t;
        self
    }

    fn transposed(self) -> Self {
        Svd { u: self.v_t.transpose(), s: self.s, v_t: self.u.transpose() }
    }
}

fn nalgebra_svd(m: &Mat) -> Option<Svd> {
    let d = m.clone().svd(true, true);
    Some(Svd { u: d.u?, s: d.singular_values.iter().copied().collect(), v_t: d.v_t? }.sorted())
}

/// One-sided Jacobi for `r ≥ c`. Slow but accurate to working precision.
fn jacobi_svd(m: &Mat) -> Svd {
    let (r, c) = m.shape();
    let mut u = m.clone();
    let mut v = Mat::identity(c, c);
    for _ in 0..60 {
        let mut rotated = false;
        for p in 0..c {
            for q in p + 1..c {
                let alpha = u.column(p).norm_squared();
                let beta = u.column(q).norm_squared();
                let gamma = u.column(p).dot(&u.column(q));
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for mat in [&mut u, &mut v] {
                    for i in 0..mat.nrows() {
                        let (a, b) = (mat[(i, p)], mat[(i, q)]);
                        mat[(i, p)] = cs * a - sn * b;
                        mat[(i, q)] = sn * a + cs * b;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let s: Vec<f64> = (0..c).map(|k| u.column(k).norm()).collect();
    let smax = s.iter().copied().fold(0.0, f64::max);
    // Columns with negligible norm carry no direction; complete them to an
    // orthonormal set afterwards.
    let mut basis: Vec<Vector> = Vec::with_capacity(c);
    let mut missing = Vec::new();
    for k in 0..c {
        if s[k] > smax * f64::EPSILON * (r as f64) && s[k] > 0.0 {
            basis.push(u.column(k) / s[k]);
        } else {
            missing.push(k);
        }
    }
    let mut out = Mat::zeros(r, c);
    let mut live = 0;
    for k in 0..c {
        if !missing.contains(&k) {
            out.set_column(k, &basis[live]);
            live += 1;
        }
    }
    let mut e = 0;
    for &k in &missing {
        loop {
            let mut w = Vector::zeros(r);
            w[e % r] = 1.0;
            e += 1;
            for _ in 0..2 {
                for j in 0..c {
                    if j == k || (missing.contains(&j) && out.column(j).norm() == 0.0) {
                        continue;
                    }
                    let col = out.column(j).into_owned();
                    w -= &col * col.dot(&w);
                }
            }
            if w.norm() > 1e-8 {
                out.set_column(k, &(&w / w.norm()));
                break;
            }
        }
    }
    Svd { u: out, s, v_t: v.transpose() }.sorted()
}

/// Thin SVD. nalgebra's result is checked and replaced when it does not
/// reconstruct `m`, which happens on some rank-deficient inputs.
pub fn svd(m: &Mat) -> Svd {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        let k = r.min(c);
        return Svd { u: Mat::zeros(r, k), s: Vec::new(), v_t: Mat::zeros(k, c) };
    }
    let tol = 1e-12 * (1.0 + m.amax()) * (r.max(c) as f64);
    if let Some(d) = nalgebra_svd(m) {
        if d.residual(m) <= tol {
            return d;
        }
    }
    let mt = m.transpose();
    if let Some(d) = nalgebra_svd(&mt) {
        if d.residual(&mt) <= tol {
            return d.transposed();
        }
    }
    if r >= c {
        jacobi_svd(m)
    } else {
        jacobi_svd(&mt).transposed()
    }
}

/// Largest singular value (spectral norm); zero for empty matrices.
pub fn norm2(m: &Mat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Singular values in descending order.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    svd(m).s
}

/// Moore-Penrose pseudoinverse with a relative singular value cutoff.
pub fn pinv(m: &Mat, rel_tol: f64) -> Mat {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Mat::zeros(c, r);
    }
    let d = svd(m);
    let smax = d.s.first().copied().unwrap_or(0.0);
    let mut out = Mat::zeros(c, r);
    for (k, &s) in d.s.iter().enumerate() {
        if s > rel_tol * smax && s > 0.0 {
            out += d.v_t.row(k).transpose() * d.u.column(k).transpose() / s;
        }
    }
    out
}

/// Orthonormal basis of the null space of `m`, using a relative cutoff on the
/// singular values. Columns are returned in a deterministic order.
pub fn null_space(m: &Mat, rel_tol: f64) -> Mat {
    let (r, c) = m.shape();
    if c == 0 {
        return Mat::zeros(0, 0);
    }
    if r == 0 {
        return Mat::identity(c, c);
    }
    // Pad with zero rows so the SVD returns a full right singular basis.
    let mut padded = Mat::zeros(r.max(c), c);
    padded.view_mut((0, 0), (r, c)).copy_from(m);
    let d = svd(&padded);
    let vt = d.v_t;
    let smax = d.s[0];
    let cut = rel_tol * smax.max(f64::MIN_POSITIVE);
    // Descending order already, so the null directions come last.
    let cols: Vec<usize> = (0..c).filter(|&k| d.s[k] <= cut).collect();
    let mut out = Mat::zeros(c, cols.len());
    for (j, &k) in cols.iter().enumerate() {
        let mut v = vt.row(k).transpose();
        let pivot = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v = -v;
        }
        out.set_column(j, &v);
    }
    out
}

/// Stack `[top; bottom]` vertically. Column counts must agree.
pub fn vstack(top: &Mat, bottom: &Mat) -> Mat {
    debug_assert_eq!(top.ncols(), bottom.ncols());
    let mut out = Mat::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.view_mut((0, 0), top.shape()).copy_from(top);
    out.view_mut((top.nrows(), 0), bottom.shape()).copy_from(bottom);
    out
}

/// Place `[a b]` side by side. Row counts must agree.
pub fn hstack(a: &Mat, b: &Mat) -> Mat {
    debug_assert_eq!(a.nrows(), b.nrows());
    let mut out = Mat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

pub fn vcat(x: &Vector, u: &Vector) -> Vector {
    let mut out = Vector::zeros(x.len() + u.len());
    out.rows_mut(0, x.len()).copy_from(x);
    out.rows_mut(x.len(), u.len()).copy_from(u);
    out
}

/// Spectral radius of a real square matrix.
pub fn spectral_radius(a: &Mat) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Row-major dense construction that also accepts zero rows or columns.
pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Mat {
    Mat::from_row_slice(rows, cols, data)
}

pub fn to_row_major(m: &Mat) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}
