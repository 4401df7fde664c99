//! Problem and report files: write a problem, produce a radius report and a
//! worst-case report, and re-verify both from disk.
//!
//! ```text
//! cargo run --example reports
//! ```

use iqc_radius::cli::{radius_report, verify_report, worst_case_report};
use iqc_radius::io::{to_json, write_json, ProblemDoc, ReportDoc};
use iqc_radius::linalg::from_row_major;
use iqc_radius::model::{IqcSet, SystemData};
use iqc_radius::worstcase::WorstCaseOptions;

fn main() -> iqc_radius::Result<()> {
    let dir = std::env::temp_dir().join("iqc-radius-reports");
    std::fs::create_dir_all(&dir).map_err(|e| iqc_radius::Error::Io { path: dir.display().to_string(), source: e })?;

    let t: f64 = 0.8;
    let sys = SystemData::autonomous(from_row_major(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]))?;
    let iqcs = IqcSet::empty(2);
    let problem = dir.join("rotation.json");
    write_json(&problem, &ProblemDoc::from_system(&sys, &iqcs))?;
    println!("{}", to_json(&ProblemDoc::read(&problem)?));

    let opts = WorstCaseOptions::default();
    for (name, (exit, report)) in [("radius", radius_report(&sys, &iqcs, &opts)?), ("worst-case", worst_case_report(&sys, &iqcs, &opts)?)] {
        let path = dir.join(format!("{name}.json"));
        write_json(&path, &report)?;
        let back = ReportDoc::read(&path)?;
        let (ok, lines) = verify_report(&back, &sys, &iqcs)?;
        println!("{name}: exit {}, classification {}, re-verified = {ok}", exit.code(), back.classification);
        print!("{lines}");
    }
    Ok(())
}
