//! JSON problem and report documents.
//!
//! Matrices are written as `{"rows": r, "cols": c, "data": [...]}` in
//! row-major order, which keeps `n×0` input matrices representable. Nested
//! row arrays are accepted on input. Non-finite numbers are written as
//! `null` and read back as `+∞`.

use std::path::Path;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::dynamic_iqc::{IqcFilter, PlantData};
use crate::linalg::{from_row_major, sym, to_row_major, vstack, Mat, Vector};
use crate::model::{IqcSet, SystemData};
use crate::radius::{Classification, RadiusCertificate, RadiusOptions};
use crate::verify::CheckReport;
use crate::worstcase::{
    build_trajectory, CMat, EigenGroup, NoWitness, Stage, TechnicalMethod, WitnessReport, WorstCaseModes,
    WorstCaseOptions,
};
use crate::{Error, Result};

/// `null` for non-finite values, `+∞` when read back.
mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixDoc {
    Dense { rows: usize, cols: usize, data: Vec<f64> },
    Rows(Vec<Vec<f64>>),
}

impl MatrixDoc {
    pub fn from_mat(m: &Mat) -> Self {
        MatrixDoc::Dense { rows: m.nrows(), cols: m.ncols(), data: to_row_major(m) }
    }

    /// Converts to a matrix, naming `field` in any error.
    pub fn to_mat(&self, field: &str) -> Result<Mat> {
        let parse = |reason: String| Error::Parse { field: field.to_string(), reason };
        let m = match self {
            MatrixDoc::Dense { rows, cols, data } => {
                if data.len() != rows * cols {
                    return Err(parse(format!("{rows}x{cols} matrix needs {} entries, found {}", rows * cols, data.len())));
                }
                from_row_major(*rows, *cols, data)
            }
            MatrixDoc::Rows(rows) => {
                let cols = rows.first().map_or(0, Vec::len);
                if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
                    return Err(parse(format!("row {i} has {} entries, expected {cols}", r.len())));
                }
                from_row_major(rows.len(), cols, &rows.concat())
            }
        };
        if let Some(k) = m.iter().position(|v| !v.is_finite()) {
            return Err(parse(format!("non-finite entry at position {k}")));
        }
        Ok(m)
    }
}

fn expect_shape(field: &str, m: &Mat, want: (usize, usize)) -> Result<()> {
    if m.shape() != want {
        return Err(Error::Parse {
            field: field.to_string(),
            reason: format!("expected {}x{}, found {}x{}", want.0, want.1, m.nrows(), m.ncols()),
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
}

/// Tolerances and horizons. Every field is optional so that a file, the
/// environment and the command line can each set a subset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bisect_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strict_eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attain_budget: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adjoint_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift_window: Option<usize>,
}

/// Names read from the environment, as `(variable, field)`.
pub const ENV_VARS: [(&str, &str); 9] = [
    ("IQC_BISECT_TOL", "bisect_tol"),
    ("IQC_RHO_MAX", "rho_max"),
    ("IQC_STRICT_EPS", "strict_eps"),
    ("IQC_ATTAIN_BUDGET", "attain_budget"),
    ("IQC_RANK_TOL", "rank_tol"),
    ("IQC_ANGLE_TOL", "angle_tol"),
    ("IQC_ADJOINT_TOL", "adjoint_tol"),
    ("IQC_HORIZON", "horizon"),
    ("IQC_SHIFT_WINDOW", "shift_window"),
];

impl OptionsDoc {
    /// Reads the `IQC_*` variables through `lookup`.
    pub fn from_env(lookup: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let mut map = serde_json::Map::new();
        for (var, field) in ENV_VARS {
            if let Some(raw) = lookup(var) {
                let value: serde_json::Value = serde_json::from_str(raw.trim()).map_err(|e| Error::Parse {
                    field: var.to_string(),
                    reason: format!("not a number: {e}"),
                })?;
                map.insert(field.to_string(), value);
            }
        }
        serde_json::from_value(serde_json::Value::Object(map)).map_err(|e| Error::Parse {
            field: "environment".to_string(),
            reason: e.to_string(),
        })
    }

    /// Fields set in `self` win over those in `lower`.
    pub fn over(&self, lower: &OptionsDoc) -> OptionsDoc {
        OptionsDoc {
            bisect_tol: self.bisect_tol.or(lower.bisect_tol),
            rho_max: self.rho_max.or(lower.rho_max),
            strict_eps: self.strict_eps.or(lower.strict_eps),
            attain_budget: self.attain_budget.or(lower.attain_budget),
            rank_tol: self.rank_tol.or(lower.rank_tol),
            angle_tol: self.angle_tol.or(lower.angle_tol),
            adjoint_tol: self.adjoint_tol.or(lower.adjoint_tol),
            horizon: self.horizon.or(lower.horizon),
            shift_window: self.shift_window.or(lower.shift_window),
        }
    }

    /// Applies the set fields on top of the defaults.
    pub fn resolve(&self) -> Result<WorstCaseOptions> {
        let d = WorstCaseOptions::default();
        let opts = WorstCaseOptions {
            rank_tol: self.rank_tol.unwrap_or(d.rank_tol),
            angle_tol: self.angle_tol.unwrap_or(d.angle_tol),
            adjoint_tol: self.adjoint_tol.unwrap_or(d.adjoint_tol),
            horizon: self.horizon.unwrap_or(d.horizon),
            shift_window: self.shift_window.unwrap_or(d.shift_window),
            radius: RadiusOptions {
                bisect_tol: self.bisect_tol.unwrap_or(d.radius.bisect_tol),
                rho_max: self.rho_max.unwrap_or(d.radius.rho_max),
                strict_eps: self.strict_eps.unwrap_or(d.radius.strict_eps),
                attain_budget: self.attain_budget.unwrap_or(d.radius.attain_budget),
                ..d.radius.clone()
            },
            ..d
        };
        opts.radius.validate()?;
        for (name, v) in [("rank_tol", opts.rank_tol), ("angle_tol", opts.angle_tol), ("adjoint_tol", opts.adjoint_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parse { field: format!("options.{name}"), reason: format!("must be positive, got {v}") });
            }
        }
        Ok(opts)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantDoc {
    #[serde(rename = "A")]
    pub a: MatrixDoc,
    #[serde(rename = "B")]
    pub b: MatrixDoc,
    #[serde(rename = "C")]
    pub c: MatrixDoc,
    #[serde(rename = "D")]
    pub d: MatrixDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterDoc {
    #[serde(rename = "A_psi")]
    pub a_psi: MatrixDoc,
    #[serde(rename = "B_psi1")]
    pub b_psi1: MatrixDoc,
    #[serde(rename = "B_psi2")]
    pub b_psi2: MatrixDoc,
    #[serde(rename = "C_psi")]
    pub c_psi: MatrixDoc,
    #[serde(rename = "D_psi1")]
    pub d_psi1: MatrixDoc,
    #[serde(rename = "D_psi2")]
    pub d_psi2: MatrixDoc,
    #[serde(rename = "M")]
    pub m: MatrixDoc,
}

/// A problem file: a static system with IQCs, or a plant with IQC filters
/// to be augmented.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Dims>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<MatrixDoc>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iqcs: Vec<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant: Option<PlantDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub filters: Vec<FilterDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<OptionsDoc>,
}

impl ProblemDoc {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            field: format!("line {} column {}", e.line(), e.column()),
            reason: e.to_string(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }

    pub fn from_system(sys: &SystemData, iqcs: &IqcSet) -> Self {
        ProblemDoc {
            dims: Some(Dims { n: sys.n(), m: sys.m() }),
            a: Some(MatrixDoc::from_mat(sys.a())),
            b: Some(MatrixDoc::from_mat(sys.b())),
            iqcs: iqcs.iter().map(MatrixDoc::from_mat).collect(),
            ..Default::default()
        }
    }

    /// The static system and its IQCs. `B` may be omitted when `m = 0`.
    pub fn system(&self) -> Result<(SystemData, IqcSet)> {
        let a = self
            .a
            .as_ref()
            .ok_or_else(|| Error::Parse { field: "A".into(), reason: "missing".into() })?
            .to_mat("A")?;
        let n = a.nrows();
        let dims = self.dims.unwrap_or(Dims { n, m: self.b.as_ref().map_or(Ok(0), |b| b.to_mat("B").map(|b| b.ncols()))? });
        expect_shape("A", &a, (dims.n, dims.n))?;
        let b = match &self.b {
            Some(b) => b.to_mat("B")?,
            None => Mat::zeros(dims.n, 0),
        };
        expect_shape("B", &b, (dims.n, dims.m))?;
        let k = dims.n + dims.m;
        let mut ms = Vec::with_capacity(self.iqcs.len());
        for (i, doc) in self.iqcs.iter().enumerate() {
            let field = format!("iqcs[{i}]");
            let m = doc.to_mat(&field)?;
            expect_shape(&field, &m, (k, k))?;
            let asym = (&m - m.transpose()).amax();
            if asym > 1e-12 * (1.0 + m.amax()) {
                return Err(Error::Parse { field, reason: format!("not symmetric (max asymmetry {asym:.3e})") });
            }
            ms.push(sym(&m));
        }
        let sys = SystemData::new(a, b)?;
        let iqcs = IqcSet::for_system(&sys, ms)?;
        Ok((sys, iqcs))
    }

    pub fn plant(&self) -> Result<PlantData> {
        let p = self.plant.as_ref().ok_or_else(|| Error::Parse { field: "plant".into(), reason: "missing".into() })?;
        PlantData::new(p.a.to_mat("plant.A")?, p.b.to_mat("plant.B")?, p.c.to_mat("plant.C")?, p.d.to_mat("plant.D")?)
    }

    pub fn filters(&self) -> Result<Vec<IqcFilter>> {
        if self.filters.is_empty() {
            return Err(Error::Parse { field: "filters".into(), reason: "missing".into() });
        }
        self.filters
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let g = |name: &str, m: &MatrixDoc| m.to_mat(&format!("filters[{i}].{name}"));
                Ok(IqcFilter {
                    a_psi: g("A_psi", &f.a_psi)?,
                    b_psi1: g("B_psi1", &f.b_psi1)?,
                    b_psi2: g("B_psi2", &f.b_psi2)?,
                    c_psi: g("C_psi", &f.c_psi)?,
                    d_psi1: g("D_psi1", &f.d_psi1)?,
                    d_psi2: g("D_psi2", &f.d_psi2)?,
                    m: g("M", &f.m)?,
                })
            })
            .collect()
    }

    /// Static IQCs written on `[x; u]` of the plant, for `augment`.
    pub fn plant_iqcs(&self) -> Result<Vec<Mat>> {
        self.iqcs.iter().enumerate().map(|(i, m)| m.to_mat(&format!("iqcs[{i}]"))).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusDoc {
    #[serde(with = "nullable")]
    pub rho: f64,
    #[serde(with = "nullable")]
    pub bracket_lo: f64,
    #[serde(with = "nullable")]
    pub bracket_hi: f64,
    pub attained: bool,
    #[serde(with = "nullable")]
    pub margin: f64,
    pub probes: usize,
    #[serde(rename = "P")]
    pub p: MatrixDoc,
    pub lambdas: Vec<f64>,
}

impl RadiusDoc {
    pub fn from_cert(c: &RadiusCertificate) -> Self {
        RadiusDoc {
            rho: c.rho,
            bracket_lo: c.bracket.0,
            bracket_hi: c.bracket.1,
            attained: c.attained,
            margin: c.margin,
            probes: c.probes,
            p: MatrixDoc::from_mat(&c.p),
            lambdas: c.lambdas.clone(),
        }
    }

    pub fn to_cert(&self) -> Result<RadiusCertificate> {
        Ok(RadiusCertificate {
            rho: self.rho,
            p: self.p.to_mat("radius.P")?,
            lambdas: self.lambdas.clone(),
            attained: self.attained,
            margin: self.margin,
            bracket: (self.bracket_lo, self.bracket_hi),
            probes: self.probes,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupDoc {
    pub theta: f64,
    pub multiplicity: usize,
    pub w_re: MatrixDoc,
    pub w_im: MatrixDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessDoc {
    pub method: TechnicalMethod,
    pub rank: usize,
    #[serde(rename = "Q")]
    pub q: MatrixDoc,
    #[serde(rename = "X")]
    pub x: MatrixDoc,
    #[serde(rename = "U")]
    pub u: MatrixDoc,
    #[serde(rename = "F")]
    pub f: MatrixDoc,
    pub groups: Vec<GroupDoc>,
    pub v: Vec<f64>,
    #[serde(rename = "K")]
    pub k: Option<MatrixDoc>,
    /// Offset after which every partial IQC sum is nonnegative.
    pub shift: Option<usize>,
    pub lower_bounds: Vec<f64>,
    pub pointwise: bool,
    pub horizon: usize,
}

impl WitnessDoc {
    pub fn from_report(w: &WitnessReport, horizon: usize) -> Self {
        let m = &w.modes;
        WitnessDoc {
            method: w.method,
            rank: m.d,
            q: MatrixDoc::from_mat(&m.q),
            x: MatrixDoc::from_mat(&m.x),
            u: MatrixDoc::from_mat(&m.u),
            f: MatrixDoc::from_mat(&m.f),
            groups: m
                .groups
                .iter()
                .map(|g| GroupDoc {
                    theta: g.theta,
                    multiplicity: g.multiplicity(),
                    w_re: MatrixDoc::from_mat(&g.w.map(|z| z.re)),
                    w_im: MatrixDoc::from_mat(&g.w.map(|z| z.im)),
                })
                .collect(),
            v: w.v.iter().copied().collect(),
            k: w.gain.as_ref().map(MatrixDoc::from_mat),
            shift: w.shift,
            lower_bounds: w.lower_bounds.clone(),
            pointwise: w.pointwise,
            horizon,
        }
    }

    /// Rebuilds the report, recomputing the IQC images and the trajectory
    /// from the stored modes.
    pub fn to_report(&self, sys: &SystemData, iqcs: &IqcSet) -> Result<WitnessReport> {
        let (n, m, d) = (sys.n(), sys.m(), self.rank);
        let q = self.q.to_mat("witness.Q")?;
        let x = self.x.to_mat("witness.X")?;
        let u = self.u.to_mat("witness.U")?;
        let f = self.f.to_mat("witness.F")?;
        expect_shape("witness.Q", &q, (n + m, n + m))?;
        expect_shape("witness.X", &x, (n, d))?;
        expect_shape("witness.U", &u, (m, d))?;
        expect_shape("witness.F", &f, (d, d))?;
        if self.v.len() != d {
            return Err(Error::Parse { field: "witness.v".into(), reason: format!("expected {d} entries, found {}", self.v.len()) });
        }
        if self.lower_bounds.len() != iqcs.len() {
            return Err(Error::Parse {
                field: "witness.lower_bounds".into(),
                reason: format!("expected {} entries, found {}", iqcs.len(), self.lower_bounds.len()),
            });
        }
        let mut groups = Vec::with_capacity(self.groups.len());
        for (i, g) in self.groups.iter().enumerate() {
            let re = g.w_re.to_mat(&format!("witness.groups[{i}].w_re"))?;
            let im = g.w_im.to_mat(&format!("witness.groups[{i}].w_im"))?;
            expect_shape(&format!("witness.groups[{i}].w_re"), &re, (d, g.multiplicity))?;
            expect_shape(&format!("witness.groups[{i}].w_im"), &im, (d, g.multiplicity))?;
            let w = CMat::from_fn(d, g.multiplicity, |r, c| Complex::new(re[(r, c)], im[(r, c)]));
            groups.push(EigenGroup { theta: g.theta, w });
        }
        let gain = match &self.k {
            Some(k) => {
                let k = k.to_mat("witness.K")?;
                expect_shape("witness.K", &k, (m, n))?;
                Some(k)
            }
            None => None,
        };
        let xu = vstack(&x, &u);
        let h = iqcs.iter().map(|mi| sym(&(xu.transpose() * mi * &xu))).collect();
        let v = Vector::from_vec(self.v.clone());
        let modes = WorstCaseModes { q, d, x, u, f, groups, h, v: Some(v.clone()) };
        let trajectory = build_trajectory(&modes, &v, self.horizon);
        Ok(WitnessReport {
            modes,
            v,
            method: self.method,
            trajectory,
            gain,
            lower_bounds: self.lower_bounds.clone(),
            shift: self.shift,
            pointwise: self.pointwise,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoWitnessDoc {
    pub stage: Stage,
    pub reason: String,
}

impl From<&NoWitness> for NoWitnessDoc {
    fn from(nw: &NoWitness) -> Self {
        NoWitnessDoc { stage: nw.stage, reason: nw.reason.clone() }
    }
}

/// Machine-readable result of a CLI command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub command: String,
    pub dims: Dims,
    pub num_iqcs: usize,
    pub classification: Classification,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<RadiusDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub no_witness: Option<NoWitnessDoc>,
    /// Checks run when the report was produced, with their margins.
    #[serde(default)]
    pub verification: CheckReport,
}

impl ReportDoc {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            field: format!("report line {} column {}", e.line(), e.column()),
            reason: e.to_string(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents contain only JSON-representable types");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    std::fs::write(path, to_json(doc)).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_rows_and_dense_agree() {
        let a = ProblemDoc::parse(r#"{"A": [[1, 2], [3, 4]]}"#).unwrap();
        let b = ProblemDoc::parse(r#"{"A": {"rows": 2, "cols": 2, "data": [1, 2, 3, 4]}}"#).unwrap();
        let (sa, _) = a.system().unwrap();
        let (sb, _) = b.system().unwrap();
        assert_eq!(sa, sb);
        assert_eq!(sa.m(), 0);
        assert_eq!(sa.a()[(1, 0)], 3.0);
    }

    #[test]
    fn ragged_rows_cite_index() {
        let doc = ProblemDoc::parse(r#"{"A": [[1, 2], [3, 4], [5]]}"#).unwrap();
        let err = doc.system().unwrap_err().to_string();
        assert!(err.contains("A") && err.contains("row 2"), "{err}");
    }

    #[test]
    fn zero_column_input_round_trips() {
        let sys = SystemData::autonomous(Mat::identity(2, 2)).unwrap();
        let doc = ProblemDoc::from_system(&sys, &IqcSet::empty(2));
        let text = to_json(&doc);
        assert!(text.contains("\"cols\": 0"));
        let (back, _) = ProblemDoc::parse(&text).unwrap().system().unwrap();
        assert_eq!(back, sys);
    }

    #[test]
    fn iqc_shape_and_symmetry_checked() {
        let err = ProblemDoc::parse(r#"{"A": [[1]], "B": [[1]], "iqcs": [[[1]]]}"#).unwrap().system().unwrap_err();
        assert!(err.to_string().contains("iqcs[0]"));
        let err = ProblemDoc::parse(r#"{"A": [[1]], "B": [[1]], "iqcs": [[[1, 2], [0, 1]]]}"#).unwrap().system().unwrap_err();
        assert!(err.to_string().contains("symmetric"));
    }

    #[test]
    fn unknown_fields_rejected_with_location() {
        let err = ProblemDoc::parse("{\n  \"A\": [[1]],\n  \"Bogus\": 1\n}").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn option_precedence() {
        let file = OptionsDoc { bisect_tol: Some(1e-4), horizon: Some(50), ..Default::default() };
        let env = OptionsDoc::from_env(|k| match k {
            "IQC_BISECT_TOL" => Some("1e-3".into()),
            "IQC_RHO_MAX" => Some("10".into()),
            _ => None,
        })
        .unwrap();
        let flags = OptionsDoc { horizon: Some(7), ..Default::default() };
        let opts = flags.over(&file.over(&env)).resolve().unwrap();
        assert_eq!(opts.radius.bisect_tol, 1e-4);
        assert_eq!(opts.radius.rho_max, 10.0);
        assert_eq!(opts.horizon, 7);
        assert_eq!(opts.radius.strict_eps, 1e-8);
    }

    #[test]
    fn bad_env_value_named() {
        let err = OptionsDoc::from_env(|k| (k == "IQC_RHO_MAX").then(|| "ten".into())).unwrap_err();
        assert!(err.to_string().contains("IQC_RHO_MAX"));
    }

    #[test]
    fn infinite_radius_serializes_as_null() {
        let doc = RadiusDoc {
            rho: f64::INFINITY,
            bracket_lo: 1e3,
            bracket_hi: f64::INFINITY,
            attained: false,
            margin: f64::INFINITY,
            probes: 3,
            p: MatrixDoc::from_mat(&Mat::zeros(1, 1)),
            lambdas: vec![],
        };
        let text = to_json(&doc);
        assert!(text.contains("\"rho\": null"));
        let back: RadiusDoc = serde_json::from_str(&text).unwrap();
        assert_eq!(back, doc);
    }
}
