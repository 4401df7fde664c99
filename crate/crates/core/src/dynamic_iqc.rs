//! Static form of dynamic (filtered) IQCs.
//!
//! A filter `Ψ` driven by the plant output `y = Cx + Du` and the input `u`
//!
//! ```text
//! ψ_{k+1} = A_ψ ψ_k + B_ψ¹ y_k + B_ψ² u_k
//! z_k     = C_ψ ψ_k + D_ψ¹ y_k + D_ψ² u_k
//! ```
//!
//! is absorbed into the state, which becomes `[x; ψ]`. The constraint on
//! `zᵀMz` turns into a static IQC on `[x; ψ; u]`. The filter starts from
//! `ψ_0 = 0`. Several filters are appended in order, giving `[x; ψ¹; ψ²; …]`.

use crate::linalg::{all_finite, hstack, vstack, Mat, Vector};
use crate::model::{IqcSet, SystemData};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PlantData {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
}

fn shape(operand: &'static str, m: &Mat, want: (usize, usize)) -> Result<()> {
    if m.shape() != want {
        return Err(Error::dims(operand, want, m.shape()));
    }
    if !all_finite(m) {
        return Err(Error::NonFinite { operand });
    }
    Ok(())
}

impl PlantData {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self> {
        let n = a.nrows();
        let (m, p) = (b.ncols(), c.nrows());
        shape("plant.A", &a, (n, n))?;
        shape("plant.B", &b, (n, m))?;
        shape("plant.C", &c, (p, n))?;
        shape("plant.D", &d, (p, m))?;
        Ok(Self { a, b, c, d })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn system(&self) -> Result<SystemData> {
        SystemData::new(self.a.clone(), self.b.clone())
    }

    pub fn output(&self, x: &Vector, u: &Vector) -> Vector {
        &self.c * x + &self.d * u
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IqcFilter {
    pub a_psi: Mat,
    pub b_psi1: Mat,
    pub b_psi2: Mat,
    pub c_psi: Mat,
    pub d_psi1: Mat,
    pub d_psi2: Mat,
    pub m: Mat,
}

impl IqcFilter {
    /// Checks the filter against a plant with `p` outputs and `m` inputs.
    pub fn check(&self, p: usize, m: usize) -> Result<()> {
        let npsi = self.a_psi.nrows();
        let q = self.c_psi.nrows();
        shape("filter.A_psi", &self.a_psi, (npsi, npsi))?;
        shape("filter.B_psi1", &self.b_psi1, (npsi, p))?;
        shape("filter.B_psi2", &self.b_psi2, (npsi, m))?;
        shape("filter.C_psi", &self.c_psi, (q, npsi))?;
        shape("filter.D_psi1", &self.d_psi1, (q, p))?;
        shape("filter.D_psi2", &self.d_psi2, (q, m))?;
        shape("filter.M", &self.m, (q, q))
    }

    pub fn states(&self) -> usize {
        self.a_psi.nrows()
    }

    /// Runs the filter from `ψ_0 = 0` and returns `z_0..z_{N-1}`.
    pub fn outputs(&self, ys: &[Vector], us: &[Vector]) -> Vec<Vector> {
        let mut psi = Vector::zeros(self.states());
        ys.iter()
            .zip(us)
            .map(|(y, u)| {
                let z = &self.c_psi * &psi + &self.d_psi1 * y + &self.d_psi2 * u;
                psi = &self.a_psi * &psi + &self.b_psi1 * y + &self.b_psi2 * u;
                z
            })
            .collect()
    }
}

/// Augmented plant with the filter states appended, and the static IQC.
pub fn augment(plant: &PlantData, filter: &IqcFilter) -> Result<(PlantData, Mat)> {
    let (n, m, p) = (plant.n(), plant.m(), plant.p());
    filter.check(p, m)?;
    let npsi = filter.states();

    let a = vstack(
        &hstack(&plant.a, &Mat::zeros(n, npsi)),
        &hstack(&(&filter.b_psi1 * &plant.c), &filter.a_psi),
    );
    let b = vstack(&plant.b, &(&filter.b_psi2 + &filter.b_psi1 * &plant.d));
    let c = hstack(&plant.c, &Mat::zeros(p, npsi));
    let map = hstack(
        &hstack(&(&filter.d_psi1 * &plant.c), &filter.c_psi),
        &(&filter.d_psi2 + &filter.d_psi1 * &plant.d),
    );
    let mm = crate::linalg::sym(&filter.m);
    let static_m = crate::linalg::sym(&(map.transpose() * mm * &map));
    Ok((PlantData { a, b, c, d: plant.d.clone() }, static_m))
}

/// Inserts `extra` zero state coordinates after the first `n` rows/columns.
fn pad_states(m: &Mat, n: usize, extra: usize) -> Mat {
    let dim = m.nrows();
    let mut out = Mat::zeros(dim + extra, dim + extra);
    let map = |i: usize| if i < n { i } else { i + extra };
    for i in 0..dim {
        for j in 0..dim {
            out[(map(i), map(j))] = m[(i, j)];
        }
    }
    out
}

/// Appends every filter in order and collects the static IQCs. `static_iqcs`
/// are constraints already written on `[x; u]` of the original plant.
pub fn augment_all(plant: &PlantData, filters: &[IqcFilter], static_iqcs: &[Mat]) -> Result<(SystemData, IqcSet)> {
    let mut current = plant.clone();
    let mut iqcs: Vec<Mat> = static_iqcs.to_vec();
    for (i, m) in iqcs.iter().enumerate() {
        let want = plant.n() + plant.m();
        if m.shape() != (want, want) {
            return Err(Error::DimensionMismatch {
                operand: "iqcs",
                expected: format!("{want}x{want}"),
                found: format!("{}x{} at index {i}", m.nrows(), m.ncols()),
            });
        }
    }
    for f in filters {
        let n = current.n();
        let (next, m) = augment(&current, f)?;
        iqcs = iqcs.iter().map(|old| pad_states(old, n, f.states())).collect();
        iqcs.push(m);
        current = next;
    }
    let sys = current.system()?;
    let set = IqcSet::for_system(&sys, iqcs)?;
    Ok((sys, set))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_row_major;

    fn scalar(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    #[test]
    fn identity_filter_is_transparent() {
        let plant = PlantData::new(
            from_row_major(2, 2, &[0.5, 0.1, 0.0, 0.3]),
            from_row_major(2, 1, &[1.0, 0.0]),
            Mat::identity(2, 2),
            Mat::zeros(2, 1),
        )
        .unwrap();
        let m0 = from_row_major(3, 3, &[1.0, 0.0, 0.5, 0.0, -1.0, 0.0, 0.5, 0.0, 2.0]);
        let filter = IqcFilter {
            a_psi: Mat::zeros(0, 0),
            b_psi1: Mat::zeros(0, 2),
            b_psi2: Mat::zeros(0, 1),
            c_psi: Mat::zeros(3, 0),
            d_psi1: from_row_major(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
            d_psi2: from_row_major(3, 1, &[0.0, 0.0, 1.0]),
            m: m0.clone(),
        };
        let (aug, m) = augment(&plant, &filter).unwrap();
        assert_eq!(aug.a, plant.a);
        assert_eq!(aug.b, plant.b);
        assert_eq!(m, m0);
    }

    #[test]
    fn delay_filter_by_hand() {
        let (a, b, c, d) = (0.7, 2.0, 3.0, 5.0);
        let plant = PlantData::new(scalar(a), scalar(b), scalar(c), scalar(d)).unwrap();
        let mq = scalar(-4.0);
        let filter = IqcFilter {
            a_psi: scalar(0.0),
            b_psi1: scalar(1.0),
            b_psi2: scalar(0.0),
            c_psi: scalar(1.0),
            d_psi1: scalar(0.0),
            d_psi2: scalar(0.0),
            m: mq,
        };
        let (aug, m) = augment(&plant, &filter).unwrap();
        assert_eq!(aug.a, from_row_major(2, 2, &[a, 0.0, c, 0.0]));
        assert_eq!(aug.b, from_row_major(2, 1, &[b, d]));
        let sel = from_row_major(1, 3, &[0.0, 1.0, 0.0]);
        assert_eq!(m, sel.transpose() * scalar(-4.0) * sel);
    }

    #[test]
    fn two_filters_stack_in_order() {
        let plant = PlantData::new(scalar(0.5), scalar(1.0), scalar(1.0), scalar(0.0)).unwrap();
        let delay = |gain: f64| IqcFilter {
            a_psi: scalar(0.0),
            b_psi1: scalar(gain),
            b_psi2: scalar(0.0),
            c_psi: scalar(1.0),
            d_psi1: scalar(0.0),
            d_psi2: scalar(0.0),
            m: scalar(1.0),
        };
        let (sys, iqcs) = augment_all(&plant, &[delay(2.0), delay(3.0)], &[]).unwrap();
        assert_eq!(sys.n(), 3);
        // Second filter reads y = x only.
        assert_eq!(sys.a()[(1, 0)], 2.0);
        assert_eq!(sys.a()[(2, 0)], 3.0);
        assert_eq!(sys.a()[(2, 1)], 0.0);
        assert_eq!(iqcs.len(), 2);
        // First IQC weighs ψ¹ only, padded with a zero row for ψ².
        assert_eq!(iqcs.get(0).unwrap()[(1, 1)], 1.0);
        assert_eq!(iqcs.get(0).unwrap()[(2, 2)], 0.0);
        assert_eq!(iqcs.get(1).unwrap()[(2, 2)], 1.0);
    }

    #[test]
    fn rejects_mismatched_filter() {
        let plant = PlantData::new(scalar(0.5), scalar(1.0), scalar(1.0), scalar(0.0)).unwrap();
        let bad = IqcFilter {
            a_psi: scalar(0.0),
            b_psi1: Mat::zeros(1, 2),
            b_psi2: scalar(0.0),
            c_psi: scalar(1.0),
            d_psi1: scalar(0.0),
            d_psi2: scalar(0.0),
            m: scalar(1.0),
        };
        let err = augment(&plant, &bad).unwrap_err();
        assert!(err.to_string().contains("filter.B_psi1"));
    }
}
