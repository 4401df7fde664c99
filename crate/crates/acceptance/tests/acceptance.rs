//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use iqc_radius::linalg::{inner, spectral_radius as eig_radius, sym, vstack, Mat, Vector};
use iqc_radius::model::{
    iqc_partial_sums, lyapunov_adjoint_weighted, lyapunov_operator, simulate, zero_inputs, IqcSet, Provenance, SystemData,
    Trajectory,
};
use iqc_radius::radius::{spectral_radius, strengthened_certificate, RadiusOptions};
use iqc_radius::sdp::margin::{solve_margin_dual, solve_margin_primal};
use iqc_radius::sdp::SolverConfig;
use iqc_radius::verify::{check_witness, lyapunov_trace};
use iqc_radius::worstcase::{recover_orthogonal_factor, worst_case, Stage, WorstCaseOptions, WorstCaseOutcome};
use iqc_radius::{dynamic_iqc, io};
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn eigenvalue_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut r = common::rng(10_000 + seed);
        let n = 1 + (seed as usize % 5);
        let a = common::gaussian(&mut r, n, n);
        let sys = SystemData::autonomous(a.clone()).map_err(|e| e.to_string())?;
        let c = spectral_radius(&sys, &IqcSet::empty(n), &RadiusOptions::default()).map_err(|e| e.to_string())?;
        worst = worst.max((c.rho - eig_radius(&a)).abs());
    }
    let took = start.elapsed();
    ensure(worst <= 1e-5 && took < Duration::from_secs(60), format!("worst error {worst:.2e} in {took:.2?}"))
}

fn jordan_block() -> Outcome {
    let sys = SystemData::from_row_major(2, 0, &[1.0, 1.0, 0.0, 1.0], &[]).map_err(|e| e.to_string())?;
    let c = spectral_radius(&sys, &IqcSet::empty(2), &RadiusOptions::default()).map_err(|e| e.to_string())?;
    let traj = simulate(&sys, &Vector::from_vec(vec![1.0, 1.0]), &zero_inputs(&sys, 100)).map_err(|e| e.to_string())?;
    let grows = traj.states().iter().enumerate().all(|(k, x)| x.norm() >= k as f64 / 2.0);
    ensure(
        (c.rho - 1.0).abs() <= 1e-5 && !c.attained && grows,
        format!("rho = {:.8}, attained = {}, linear growth = {grows}", c.rho, c.attained),
    )
}

fn scalar_opposite_iqcs() -> Outcome {
    let sys = SystemData::autonomous(Mat::identity(1, 1)).map_err(|e| e.to_string())?;
    let iqcs = IqcSet::new(1, vec![Mat::identity(1, 1), -Mat::identity(1, 1)]).map_err(|e| e.to_string())?;
    let c = spectral_radius(&sys, &iqcs, &RadiusOptions::default()).map_err(|e| e.to_string())?;
    let outcome = worst_case(&sys, &iqcs, &WorstCaseOptions::default()).map_err(|e| e.to_string())?;
    let stage = match &outcome {
        WorstCaseOutcome::NoWitness(nw) => Some(nw.stage),
        WorstCaseOutcome::Witness(_) => None,
    };
    let stage_ok = matches!(stage, Some(Stage::DualExtraction | Stage::TechnicalCondition));
    ensure(
        (c.rho - 1.0).abs() <= 1e-5 && c.attained && stage_ok,
        format!(
            "rho = {:.3e}, attained = {}, stage = {}",
            c.rho,
            c.attained,
            stage.map_or("witness found".to_string(), |s| s.to_string())
        ),
    )
}

fn strong_duality() -> Outcome {
    let cfg = SolverConfig::default();
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let (sys, iqcs) = common::duality_instance(seed);
        let p = solve_margin_primal(&sys, &iqcs, 0.4, &cfg).map_err(|e| e.to_string())?;
        let d = solve_margin_dual(&sys, &iqcs, 0.4, &cfg).map_err(|e| e.to_string())?;
        worst = worst.max((p.s_star - d.d_star).abs() / (1.0 + p.s_star.abs()));
    }
    ensure(worst <= 1e-6, format!("worst relative gap {worst:.2e}"))
}

fn adjoint_identity() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let mut r = common::rng(20_000 + seed);
        let (n, m) = (1 + seed as usize % 5, seed as usize % 3);
        let sys = SystemData::new(common::gaussian(&mut r, n, n), common::gaussian(&mut r, n, m)).map_err(|e| e.to_string())?;
        let rho = r.gen_range(0.1..3.0);
        let p = sym(&common::gaussian(&mut r, n, n));
        let q = sym(&common::gaussian(&mut r, n + m, n + m));
        let lhs = inner(&q, &lyapunov_operator(&p, &sys, rho).map_err(|e| e.to_string())?);
        let rhs = inner(&lyapunov_adjoint_weighted(&q, &sys, rho).map_err(|e| e.to_string())?, &p);
        worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs().max(rhs.abs())));
    }
    ensure(worst <= 1e-10, format!("worst relative error {worst:.2e}"))
}

fn procrustes() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let mut r = common::rng(30_000 + seed);
        let (n, d) = (1 + seed as usize % 5, 1 + seed as usize % 4);
        let mut h = common::gaussian(&mut r, n, d);
        if seed % 3 == 0 && d > 1 {
            let c = h.column(0).into_owned();
            h.set_column(d - 1, &c);
        }
        let g = common::gaussian(&mut r, d, d);
        let f0 = iqc_radius::linalg::sym_eigen_desc(&sym(&(&g + g.transpose()))).1;
        let f = recover_orthogonal_factor(&h, &(&h * &f0)).map_err(|e| e.to_string())?;
        worst = worst.max((&h * &f - &h * &f0).norm());
    }
    ensure(worst <= 1e-9, format!("worst residual {worst:.2e}"))
}

fn witness_soundness() -> Outcome {
    let start = Instant::now();
    let mut instances = vec![(SystemData::autonomous(common::rotation(0.9)).unwrap(), IqcSet::empty(2))];
    instances.extend(common::unit_instances().into_iter().map(|u| (u.sys, u.iqcs)));
    let mut failures = Vec::new();
    for (k, (sys, iqcs)) in instances.iter().enumerate() {
        match worst_case(sys, iqcs, &WorstCaseOptions::default()).map_err(|e| e.to_string())? {
            WorstCaseOutcome::Witness(w) => {
                let report = check_witness(sys, iqcs, &w, 10_000);
                failures.extend(report.failures().map(|c| format!("#{k} {}", c.name)));
            }
            WorstCaseOutcome::NoWitness(nw) => failures.push(format!("#{k} no witness at {}", nw.stage)),
        }
    }
    let took = start.elapsed();
    ensure(
        failures.is_empty() && took < Duration::from_secs(120),
        format!("{} instances in {took:.2?}; failed: {failures:?}", instances.len()),
    )
}

fn gradient_descent() -> Outcome {
    let mut worst = 0.0f64;
    for alpha in [0.02, 2.0 / 11.0, 0.15] {
        let oracle = (1.0f64 - alpha).abs().max((1.0f64 - 10.0 * alpha).abs());
        let (sys, iqcs) = common::gradient_descent(alpha, 1.0, 10.0);
        let c = spectral_radius(&sys, &iqcs, &RadiusOptions::default()).map_err(|e| e.to_string())?;
        worst = worst.max((c.rho - oracle).abs());
    }
    ensure(worst <= 1e-3, format!("worst deviation {worst:.2e}"))
}

fn augmentation() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut r = common::rng(40_000 + seed);
        let (n, m, p) = (1 + seed as usize % 4, 1 + seed as usize % 2, 1 + seed as usize % 3);
        let (npsi, q) = (seed as usize % 3, 1 + seed as usize % 3);
        let plant = common::random_plant(&mut r, n, m, p);
        let filter = common::random_filter(&mut r, npsi, q, p, m);
        let x0 = common::gaussian(&mut r, n, 1).column(0).into_owned();
        let us: Vec<Vector> = (0..500).map(|_| common::gaussian(&mut r, m, 1).column(0).into_owned()).collect();

        let traj = simulate(&plant.system().unwrap(), &x0, &us).map_err(|e| e.to_string())?;
        let ys: Vec<Vector> = traj.states().iter().zip(&us).map(|(x, u)| plant.output(x, u)).collect();
        let mut acc = 0.0;
        let filtered: Vec<f64> = filter
            .outputs(&ys, &us)
            .iter()
            .map(|z| {
                acc += z.dot(&(&filter.m * z));
                acc
            })
            .collect();

        let (aug, ms) = dynamic_iqc::augment(&plant, &filter).map_err(|e| e.to_string())?;
        let sys = aug.system().map_err(|e| e.to_string())?;
        let start = vstack(&Mat::from_column_slice(n, 1, x0.as_slice()), &Mat::zeros(npsi, 1)).column(0).into_owned();
        let traj = simulate(&sys, &start, &us).map_err(|e| e.to_string())?;
        let iqcs = IqcSet::for_system(&sys, vec![ms]).map_err(|e| e.to_string())?;
        let sums = iqc_partial_sums(&traj, &iqcs).map_err(|e| e.to_string())?;
        for (a, b) in filtered.iter().zip(&sums[0]) {
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1.0));
        }
    }
    ensure(worst <= 1e-8, format!("worst relative error {worst:.2e}"))
}

fn sector_loop(sys: &SystemData, x0: Vector, seed: u64, steps: usize) -> Trajectory {
    let mut r = common::rng(seed);
    let mut states = vec![x0];
    let mut inputs = Vec::new();
    for _ in 0..steps {
        let x = states.last().unwrap();
        let u = Vector::from_element(1, r.gen_range(1.0..=10.0) * x[0]);
        states.push(sys.step(x, &u));
        inputs.push(u);
    }
    Trajectory::new(states, inputs, Provenance::Simulated).unwrap()
}

fn lyapunov_descent() -> Outcome {
    let opts = RadiusOptions::default();
    let mut cases = Vec::new();
    for alpha in [0.02, 2.0 / 11.0, 0.15] {
        cases.push((common::gradient_descent(alpha, 1.0, 10.0), Vector::from_element(1, 2.0)));
    }
    cases.push((common::heavy_ball(0.05, 0.3, 1.0, 10.0), Vector::from_vec(vec![1.0, -2.0])));
    let (mut worst, mut identity, mut steps) = (f64::NEG_INFINITY, 0.0f64, 0);
    for (i, ((sys, iqcs), x0)) in cases.into_iter().enumerate() {
        if spectral_radius(&sys, &iqcs, &opts).map_err(|e| e.to_string())?.rho >= 1.0 {
            return Err(format!("case {i} is not certified below one"));
        }
        let (p, lambdas) = strengthened_certificate(&sys, &iqcs, &opts).map_err(|e| e.to_string())?;
        for seed in 0..5u64 {
            let traj = sector_loop(&sys, &x0 * (1.0 + seed as f64), 100 * i as u64 + seed, 300);
            let t = lyapunov_trace(&sys, &traj, &p, &lambdas, &iqcs).map_err(|e| e.to_string())?;
            identity = identity.max(t.identity_error);
            for (d, x) in t.deltas.iter().zip(traj.states()) {
                let nx = x.norm_squared();
                worst = worst.max((d + nx) / (1.0 + nx));
                steps += 1;
            }
        }
    }
    ensure(
        worst <= 1e-8,
        format!("{steps} steps; worst (ΔV + ‖x‖²)/(1 + ‖x‖²) = {worst:.2e}, identity error {identity:.2e}"),
    )
}

fn run_cli(args: &[&str]) -> (u8, String) {
    let mut out = Vec::new();
    let argv = std::iter::once("iqc-radius").chain(args.iter().copied());
    let code = iqc_radius::cli::run(argv, |_| None, &mut out);
    (code, String::from_utf8_lossy(&out).into_owned())
}

fn determinism() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let at = |name: &str| dir.path().join(name);
    let write = |name: &str, text: &str| fs::write(at(name), text).map_err(|e| e.to_string());
    let s = |p: &Path| p.to_str().unwrap().to_string();

    let inst = common::unit_instance(13, 4, 1, common::orthogonal(&[2.3], &[1.0]), 2);
    io::write_json(&at("synthetic.json"), &io::ProblemDoc::from_system(&inst.sys, &inst.iqcs)).map_err(|e| e.to_string())?;
    write("rotation.json", r#"{"dims": {"n": 2, "m": 0}, "A": [[0, -1], [1, 0]]}"#)?;
    write(
        "filtered.json",
        r#"{"plant": {"A": [[0.5]], "B": [[1]], "C": [[1]], "D": [[0]]},
            "filters": [{"A_psi": [[0]], "B_psi1": [[1]], "B_psi2": [[0]], "C_psi": [[1], [0]],
                         "D_psi1": [[0], [0]], "D_psi2": [[0], [1]], "M": [[1, 0], [0, -1]]}]}"#,
    )?;

    let mut runs: Vec<(String, Vec<String>)> = Vec::new();
    for (cmd, prob) in [("radius", "synthetic.json"), ("worst-case", "synthetic.json"), ("worst-case", "rotation.json"), ("augment", "filtered.json")] {
        let outs: Vec<String> = (0..2).map(|k| s(&at(&format!("{cmd}-{prob}-{k}")))).collect();
        runs.push((format!("{cmd} {prob}"), vec![cmd.into(), s(&at(prob)), "--out".into(), outs[0].clone()]));
        runs.push((format!("{cmd} {prob}"), vec![cmd.into(), s(&at(prob)), "--out".into(), outs[1].clone()]));
    }
    let mut differing = Vec::new();
    for pair in runs.chunks(2) {
        let (c0, o0) = run_cli(&pair[0].1.iter().map(String::as_str).collect::<Vec<_>>());
        let (c1, o1) = run_cli(&pair[1].1.iter().map(String::as_str).collect::<Vec<_>>());
        let same_files = fs::read(&pair[0].1[3]).ok() == fs::read(&pair[1].1[3]).ok();
        if c0 != c1 || o0 != o1 || !same_files {
            differing.push(pair[0].0.clone());
        }
    }
    let report = s(&at("worst-case-synthetic.json-0"));
    let problem = s(&at("synthetic.json"));
    let v0 = run_cli(&["verify", &report, &problem]);
    let v1 = run_cli(&["verify", &report, &problem]);
    if v0 != v1 {
        differing.push("verify".into());
    }
    ensure(differing.is_empty() && v0.0 == 0, format!("radius, worst-case, verify, augment run twice; differing: {differing:?}"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("matrix spectral radius oracle", eigenvalue_oracle),
        ("Jordan block, not attained", jordan_block),
        ("scalar example with opposite IQCs", scalar_opposite_iqcs),
        ("strong duality", strong_duality),
        ("adjoint identity", adjoint_identity),
        ("orthogonal factor round trip", procrustes),
        ("worst-case witness soundness", witness_soundness),
        ("gradient descent rate", gradient_descent),
        ("dynamic IQC augmentation", augmentation),
        ("Lyapunov descent", lyapunov_descent),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {:>2} {name}: {detail} [{:.2?}]", i + 1, start.elapsed());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
