//! Command-line front end.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | input error (unreadable or malformed file, inconsistent dimensions) |
//! | 2 | no certificate for any ρ up to `rho_max` |
//! | 3 | no worst-case witness; the report names the stage that stopped |
//! | 4 | verification failed |
//! | 5 | solver failure |
//!
//! Option precedence, highest first: command-line flags, the problem file's
//! `options` block, `IQC_*` environment variables, built-in defaults.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::dynamic_iqc::augment_all;
use crate::io::{NoWitnessDoc, OptionsDoc, ProblemDoc, RadiusDoc, ReportDoc, WitnessDoc, write_json, to_json, Dims};
use crate::model::{IqcSet, SystemData};
use crate::radius::{spectral_radius, Classification, RadiusCertificate};
use crate::sdp::margin::margin_at;
use crate::verify::{check_certificate, check_witness, Check, CheckReport};
use crate::worstcase::{radius_precheck, witness_pipeline, WorstCaseOptions, WorstCaseOutcome};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Exit {
    Ok = 0,
    Input = 1,
    NoCertificate = 2,
    NoWitness = 3,
    VerificationFailed = 4,
    Solver = 5,
}

impl Exit {
    pub fn code(self) -> u8 {
        self as u8
    }

    fn for_error(e: &Error) -> Self {
        match e {
            Error::Solver { .. } | Error::Declined(_) | Error::Problem(_) => Exit::Solver,
            _ => Exit::Input,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "iqc-radius", version, about = "Generalized spectral radius of LTI systems under IQCs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bisect for the radius and report the Lyapunov certificate.
    Radius {
        problem: PathBuf,
        /// Bisection tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        rho_max: Option<f64>,
        #[arg(long)]
        strict_eps: Option<f64>,
        /// Where to write the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Construct a non-convergent IQC-satisfying trajectory at radius one.
    WorstCase {
        problem: PathBuf,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check a report against its problem file.
    Verify { report: PathBuf, problem: PathBuf },
    /// Absorb IQC filters into the plant and emit a static problem file.
    Augment {
        problem: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args`, runs the command and returns the exit code. `env` looks up
/// environment variables.
pub fn run<I, T>(args: I, env: impl Fn(&str) -> Option<String>, stdout: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Exit::Input.code() } else { Exit::Ok.code() };
        }
    };
    match execute(&cli.command, &env) {
        Ok((exit, summary)) => {
            let _ = stdout.write_all(summary.as_bytes());
            exit.code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            Exit::for_error(&e).code()
        }
    }
}

fn execute(cmd: &Command, env: &dyn Fn(&str) -> Option<String>) -> Result<(Exit, String)> {
    match cmd {
        Command::Radius { problem, tol, rho_max, strict_eps, out } => {
            let flags = OptionsDoc { bisect_tol: *tol, rho_max: *rho_max, strict_eps: *strict_eps, ..Default::default() };
            let (doc, opts) = load(problem, &flags, env)?;
            let (sys, iqcs) = doc.system()?;
            let (exit, report) = radius_report(&sys, &iqcs, &opts)?;
            finish(exit, &report, out.as_deref())
        }
        Command::WorstCase { problem, horizon, out } => {
            let flags = OptionsDoc { horizon: *horizon, ..Default::default() };
            let (doc, opts) = load(problem, &flags, env)?;
            let (sys, iqcs) = doc.system()?;
            let (exit, report) = worst_case_report(&sys, &iqcs, &opts)?;
            finish(exit, &report, out.as_deref())
        }
        Command::Verify { report, problem } => {
            let doc = ProblemDoc::read(problem)?;
            let (sys, iqcs) = doc.system()?;
            let report = ReportDoc::read(report)?;
            let (ok, summary) = verify_report(&report, &sys, &iqcs)?;
            Ok((if ok { Exit::Ok } else { Exit::VerificationFailed }, summary))
        }
        Command::Augment { problem, out } => {
            let doc = ProblemDoc::read(problem)?;
            let augmented = augment_doc(&doc)?;
            let dims = augmented.dims.expect("set by augment_doc");
            let mut summary = format!(
                "augmented: n = {}, m = {}, {} IQCs from {} filters\n",
                dims.n,
                dims.m,
                augmented.iqcs.len(),
                doc.filters.len()
            );
            match out {
                Some(path) => write_json(path, &augmented)?,
                None => summary.push_str(&to_json(&augmented)),
            }
            Ok((Exit::Ok, summary))
        }
    }
}

fn load(path: &Path, flags: &OptionsDoc, env: &dyn Fn(&str) -> Option<String>) -> Result<(ProblemDoc, WorstCaseOptions)> {
    let doc = ProblemDoc::read(path)?;
    let env = OptionsDoc::from_env(env)?;
    let file = doc.options.clone().unwrap_or_default();
    let opts = flags.over(&file.over(&env)).resolve()?;
    Ok((doc, opts))
}

fn finish(exit: Exit, report: &ReportDoc, out: Option<&Path>) -> Result<(Exit, String)> {
    if let Some(path) = out {
        write_json(path, report)?;
    }
    Ok((exit, summarize(report)))
}

/// Classification available from the radius alone.
pub fn radius_classification(cert: &RadiusCertificate, bisect_tol: f64) -> Classification {
    if !cert.is_finite() {
        Classification::Inconclusive
    } else if cert.rho < 1.0 - bisect_tol {
        Classification::AsymptoticallyStable
    } else if (cert.rho - 1.0).abs() <= bisect_tol && cert.attained {
        Classification::Bounded
    } else {
        Classification::Inconclusive
    }
}

fn prefixed(prefix: &str, r: CheckReport) -> Vec<Check> {
    r.checks.into_iter().map(|c| Check { name: format!("{prefix}.{}", c.name), ..c }).collect()
}

fn certificate_checks(sys: &SystemData, iqcs: &IqcSet, cert: &RadiusCertificate, strict_eps: f64) -> Result<Vec<Check>> {
    Ok(prefixed("certificate", check_certificate(sys, iqcs, cert, strict_eps)?))
}

pub fn radius_report(sys: &SystemData, iqcs: &IqcSet, opts: &WorstCaseOptions) -> Result<(Exit, ReportDoc)> {
    let cert = spectral_radius(sys, iqcs, &opts.radius)?;
    let checks = certificate_checks(sys, iqcs, &cert, opts.radius.strict_eps)?;
    let exit = if cert.is_finite() { Exit::Ok } else { Exit::NoCertificate };
    Ok((
        exit,
        ReportDoc {
            command: "radius".into(),
            dims: Dims { n: sys.n(), m: sys.m() },
            num_iqcs: iqcs.len(),
            classification: radius_classification(&cert, opts.radius.bisect_tol),
            radius: Some(RadiusDoc::from_cert(&cert)),
            witness: None,
            no_witness: None,
            verification: CheckReport { checks },
        },
    ))
}

pub fn worst_case_report(sys: &SystemData, iqcs: &IqcSet, opts: &WorstCaseOptions) -> Result<(Exit, ReportDoc)> {
    let cert = spectral_radius(sys, iqcs, &opts.radius)?;
    let mut checks = certificate_checks(sys, iqcs, &cert, opts.radius.strict_eps)?;
    let outcome = match radius_precheck(&cert, opts) {
        Some(nw) => WorstCaseOutcome::NoWitness(nw),
        None => witness_pipeline(sys, iqcs, opts)?,
    };
    let mut report = ReportDoc {
        command: "worst-case".into(),
        dims: Dims { n: sys.n(), m: sys.m() },
        num_iqcs: iqcs.len(),
        classification: radius_classification(&cert, opts.radius.bisect_tol),
        radius: Some(RadiusDoc::from_cert(&cert)),
        witness: None,
        no_witness: None,
        verification: CheckReport::default(),
    };
    let exit = match outcome {
        WorstCaseOutcome::Witness(w) => {
            checks.extend(prefixed("witness", check_witness(sys, iqcs, &w, opts.horizon)));
            report.classification = Classification::WitnessUnstable;
            report.witness = Some(WitnessDoc::from_report(&w, opts.horizon));
            Exit::Ok
        }
        WorstCaseOutcome::NoWitness(nw) => {
            report.no_witness = Some(NoWitnessDoc::from(&nw));
            Exit::NoWitness
        }
    };
    report.verification = CheckReport { checks };
    Ok((exit, report))
}

fn same(recorded: f64, fresh: f64) -> bool {
    recorded == fresh || (recorded - fresh).abs() <= 1e-9 * (1.0 + recorded.abs())
}

/// Recomputes every recorded check from the report's certificate and
/// witness. Passes when each check passes again and reproduces its recorded
/// value. Inconsistent dimensions are an input error.
pub fn verify_report(report: &ReportDoc, sys: &SystemData, iqcs: &IqcSet) -> Result<(bool, String)> {
    let want = Dims { n: sys.n(), m: sys.m() };
    if report.dims != want || report.num_iqcs != iqcs.len() {
        return Err(Error::DimensionMismatch {
            operand: "report",
            expected: format!("n = {}, m = {}, {} IQCs", want.n, want.m, iqcs.len()),
            found: format!("n = {}, m = {}, {} IQCs", report.dims.n, report.dims.m, report.num_iqcs),
        });
    }
    let mut fresh = Vec::new();
    let mut lines = String::new();
    let mut ok = true;
    if let Some(r) = &report.radius {
        let cert = r.to_cert()?;
        if cert.is_finite() {
            if cert.p.shape() != (want.n, want.n) || cert.lambdas.len() != iqcs.len() {
                return Err(Error::Parse {
                    field: "radius".into(),
                    reason: "certificate dimensions do not match the problem".into(),
                });
            }
            let margin = margin_at(sys, iqcs, cert.rho, &cert.p, &cert.lambdas);
            let reproduced = same(cert.margin, margin);
            ok &= reproduced;
            let _ = writeln!(
                lines,
                "{} lyapunov-margin recorded {:.6e} recomputed {:.6e}",
                if reproduced { "PASS" } else { "FAIL" },
                cert.margin,
                margin
            );
            // Options are not stored in the report; use the tightest default.
            fresh.extend(certificate_checks(sys, iqcs, &cert, WorstCaseOptions::default().radius.strict_eps)?);
        }
    }
    if let Some(w) = &report.witness {
        let rebuilt = w.to_report(sys, iqcs)?;
        fresh.extend(prefixed("witness", check_witness(sys, iqcs, &rebuilt, w.horizon)));
    }
    for rec in &report.verification.checks {
        match fresh.iter().find(|c| c.name == rec.name) {
            Some(c) => {
                let pass = c.passed && same(rec.value, c.value);
                ok &= pass;
                let _ = writeln!(
                    lines,
                    "{} {} recorded {:.6e} recomputed {:.6e} (threshold {:.1e})",
                    if pass { "PASS" } else { "FAIL" },
                    rec.name,
                    rec.value,
                    c.value,
                    c.threshold
                );
            }
            None => {
                ok = false;
                let _ = writeln!(lines, "FAIL {} not reproducible from the report", rec.name);
            }
        }
    }
    for c in fresh.iter().filter(|c| !report.verification.checks.iter().any(|r| r.name == c.name)) {
        ok &= c.passed;
        let _ = writeln!(lines, "{} {} {:.6e} (unrecorded)", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value);
    }
    let _ = writeln!(lines, "verification {}", if ok { "passed" } else { "failed" });
    Ok((ok, lines))
}

/// Human-readable summary for stdout.
pub fn summarize(r: &ReportDoc) -> String {
    let mut s = String::new();
    if let Some(rad) = &r.radius {
        if rad.rho.is_finite() {
            let _ = writeln!(s, "rho = {:.9}", rad.rho);
            let _ = writeln!(s, "bracket = [{:.9}, {:.9}]", rad.bracket_lo, rad.bracket_hi);
            let _ = writeln!(s, "attained = {}", rad.attained);
            let _ = writeln!(s, "margin = {:.3e}", rad.margin);
        } else {
            let _ = writeln!(s, "no certificate for rho <= {}", rad.bracket_lo);
        }
    }
    let _ = writeln!(s, "classification = {}", r.classification);
    if let Some(w) = &r.witness {
        let _ = writeln!(s, "witness: rank {}, {} eigen-groups, method {}", w.rank, w.groups.len(), w.method);
        if w.k.is_some() && r.dims.m > 0 {
            let _ = writeln!(s, "worst-case input is static state feedback");
        }
    }
    if let Some(nw) = &r.no_witness {
        let _ = writeln!(s, "no witness (stage {}): {}", nw.stage, nw.reason);
    }
    let failed = r.verification.failures().count();
    let _ = writeln!(s, "checks: {} run, {} failed", r.verification.checks.len(), failed);
    s
}

/// Static problem from a plant with IQC filters.
pub fn augment_doc(doc: &ProblemDoc) -> Result<ProblemDoc> {
    let plant = doc.plant()?;
    let filters = doc.filters()?;
    let (sys, iqcs) = augment_all(&plant, &filters, &doc.plant_iqcs()?)?;
    Ok(ProblemDoc { options: doc.options.clone(), ..ProblemDoc::from_system(&sys, &iqcs) })
}
