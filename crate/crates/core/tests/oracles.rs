//! Radius against independent oracles and the worked examples.

mod common;

use iqc_radius::linalg::{from_row_major, spectral_radius as eig_radius, Mat, Vector};
use iqc_radius::model::{simulate, zero_inputs, IqcSet, SystemData};
use iqc_radius::radius::{classify, jordan_diagnostic, spectral_radius, Classification, RadiusOptions};
use iqc_radius::worstcase::{witness_pipeline, Stage, WorstCaseOptions, WorstCaseOutcome};

#[test]
fn matches_eigenvalue_radius_without_iqcs() {
    for seed in 0..25u64 {
        let mut r = common::rng(500 + seed);
        let n = 1 + (seed as usize % 5);
        let a = common::gaussian(&mut r, n, n);
        let sys = SystemData::autonomous(a.clone()).unwrap();
        let c = spectral_radius(&sys, &IqcSet::empty(n), &RadiusOptions::default()).unwrap();
        assert!((c.rho - eig_radius(&a)).abs() <= 1e-5, "seed {seed}: {} vs {}", c.rho, eig_radius(&a));
    }
}

/// Contraction factor of gradient descent on `f(x) = c x² / 2`, measured by
/// iterating.
fn quadratic_factor(alpha: f64, c: f64) -> f64 {
    let mut x = 1.0f64;
    for _ in 0..20 {
        x -= alpha * c * x;
    }
    x.abs().powf(1.0 / 20.0)
}

#[test]
fn gradient_descent_oracle() {
    let (mf, l) = (1.0, 10.0);
    for alpha in [0.02, 2.0 / 11.0, 0.15] {
        // The worst quadratic sits at an end of the sector.
        let sampled = (0..=90).map(|k| quadratic_factor(alpha, mf + k as f64 * 0.1)).fold(0.0, f64::max);
        let oracle = (1.0 - alpha * mf).abs().max((1.0 - alpha * l).abs());
        assert!((sampled - oracle).abs() < 1e-12);

        let (sys, iqcs) = common::gradient_descent(alpha, mf, l);
        let c = spectral_radius(&sys, &iqcs, &RadiusOptions::default()).unwrap();
        assert!((c.rho - oracle).abs() <= 1e-4, "alpha {alpha}: {} vs {oracle}", c.rho);
        assert!(c.attained);
    }
}

#[test]
fn jordan_block_not_attained() {
    let sys = SystemData::autonomous(from_row_major(2, 2, &[1.0, 1.0, 0.0, 1.0])).unwrap();
    let c = spectral_radius(&sys, &IqcSet::empty(2), &RadiusOptions::default()).unwrap();
    assert!((c.rho - 1.0).abs() <= 1e-5);
    assert!(!c.attained);

    let traj = simulate(&sys, &Vector::from_vec(vec![1.0, 1.0]), &zero_inputs(&sys, 100)).unwrap();
    for (k, x) in traj.states().iter().enumerate() {
        assert!(x.norm() >= k as f64 / 2.0);
    }
    let diag = jordan_diagnostic(&sys, 100).unwrap();
    assert!(diag.states()[100].norm() > 50.0);
}

#[test]
fn rotation_is_bounded_with_witness() {
    let sys = SystemData::autonomous(common::rotation(0.3)).unwrap();
    let v = classify(&sys, &IqcSet::empty(2), &RadiusOptions::default()).unwrap();
    assert!(v.bounded);
    assert_eq!(v.classification, Classification::WitnessUnstable);
    assert!(v.witness.is_some());
    assert!(v.diagnostic.is_none());
}

/// Scalar `A = 1` with the IQCs `±x²`. The multiplier on `−x²` alone makes
/// the LMI feasible for every ρ > 0, so the computed radius is the lower
/// bisection limit.
#[test]
fn opposite_scalar_iqcs() {
    let sys = SystemData::autonomous(Mat::identity(1, 1)).unwrap();
    let iqcs = IqcSet::new(1, vec![Mat::identity(1, 1), -Mat::identity(1, 1)]).unwrap();
    let opts = RadiusOptions::default();
    let c = spectral_radius(&sys, &iqcs, &opts).unwrap();
    assert!(c.rho <= opts.bisect_tol);
    // Feasible at any positive ρ with P = 1, λ = (0, 1).
    for rho in [1e-3, 0.5, 1.0] {
        let m = iqc_radius::sdp::margin::margin_at(&sys, &iqcs, rho, &Mat::identity(1, 1), &[0.0, 1.0]);
        assert!(m <= -rho * rho + 1e-15);
    }
    match witness_pipeline(&sys, &iqcs, &WorstCaseOptions::default()).unwrap() {
        WorstCaseOutcome::NoWitness(nw) => assert_eq!(nw.stage, Stage::DualExtraction),
        WorstCaseOutcome::Witness(_) => panic!("no IQC-satisfying non-trivial trajectory exists"),
    }
}

#[test]
fn heavy_ball_certified() {
    let (sys, iqcs) = common::heavy_ball(0.05, 0.3, 1.0, 10.0);
    let c = spectral_radius(&sys, &iqcs, &RadiusOptions::default()).unwrap();
    assert!(c.rho < 1.0, "{}", c.rho);
    // No IQC can beat the worst quadratic in the sector.
    let worst_linear = [1.0, 10.0]
        .iter()
        .map(|g| eig_radius(&(sys.a() + sys.b() * Mat::from_row_slice(1, 2, &[*g, 0.0]))))
        .fold(0.0, f64::max);
    assert!(c.rho >= worst_linear - 1e-6);
}
