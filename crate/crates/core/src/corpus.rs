//! Worked examples as executable fixtures.
//!
//! Each fixture bundles a source equation, optional symmetry pair, a chain
//! of point transformations with the target equation after each one, and an
//! exact solution family. Printed real forms ride along so that each run can
//! report where they disagree with the computed ones.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::codes::{decompose, Code, CodeError, CodeFile};
use crate::expr::{
    equiv_zero, parse, Alphabet, Binding, Expr, SampleError, Sampler, SamplerConfig,
};
use crate::lie::{check_linearizable, LieConditionReport, LieError, Verdict};
use crate::report::{num, Annotation, AnnotationKind, Report};
use crate::symmetry::{
    classify_theorem_case, flow_invariance_check, is_symmetry, realify_field, CaseClassification,
    ComplexVectorField, Field, FieldFile, FlowInvarianceReport, RealVectorField, SymmetryError,
    TheoremCase,
};
use crate::transform::{
    case6_complex, realify_transformation, verify_ode_linearization, verify_pde_linearization,
    Branches, ComplexPointTransformation, FamilyFile, GridSpec, RealPointTransformation,
    SolutionFamily, TransformError, TransformFile, Transformation, VerificationReport,
};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
    #[error("fixture format: {0}")]
    Format(String),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Symmetry(#[from] SymmetryError),
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Sampling(#[from] SampleError),
    #[error("fixture file: {0}")]
    Io(#[from] std::io::Error),
}

/// Fixture names in report order.
pub const FIXTURE_NAMES: [&str; 9] = [
    "EX1",
    "EX2_W0",
    "EX2_WCONST",
    "EX3",
    "EX4_W0",
    "EX4_WCONST",
    "NONLIN_UUP",
    "RICATTI",
    "SHO",
];

const SOURCES: [&str; 9] = [
    include_str!("../fixtures/corpus/EX1.json"),
    include_str!("../fixtures/corpus/EX2_W0.json"),
    include_str!("../fixtures/corpus/EX2_WCONST.json"),
    include_str!("../fixtures/corpus/EX3.json"),
    include_str!("../fixtures/corpus/EX4_W0.json"),
    include_str!("../fixtures/corpus/EX4_WCONST.json"),
    include_str!("../fixtures/corpus/NONLIN_UUP.json"),
    include_str!("../fixtures/corpus/RICATTI.json"),
    include_str!("../fixtures/corpus/SHO.json"),
];

/// A printed real equation `lhs = rhs`. `P` and `Q` stand for the two
/// printed operators (`f_xx - f_yy + 2g_xy` and `g_xx - g_yy - 2f_xy` at
/// second order, `f_x + g_y` and `g_x - f_y` at first).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrintedEquation {
    pub lhs: String,
    pub rhs: String,
}

impl std::fmt::Display for PrintedEquation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} = {}", self.lhs, self.rhs)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StageTransformFile {
    Case6 { case6: [f64; 4] },
    Map(TransformFile),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageFile {
    pub transformation: StageTransformFile,
    pub target: CodeFile,
    #[serde(default, rename = "z_of_Z", skip_serializing_if = "Option::is_none")]
    pub z_of_big_z: Option<Branches>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub printed_complex: Option<TransformFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub printed_transformation: Option<TransformFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub printed_target: Option<Vec<PrintedEquation>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureFile {
    pub name: String,
    pub summary: String,
    pub expected: Verdict,
    pub code: CodeFile,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub symmetries: Vec<FieldFile>,
    /// Printed `(X, Y)` pair for each symmetry.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub printed_symmetries: Vec<[FieldFile; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stated_case: Option<TheoremCase>,
    /// Values of the symbols printed forms use for instantiated functions.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub printed_values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub printed_source: Option<Vec<PrintedEquation>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<StageFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<Annotation>,
}

/// A printed equation compiled to `lhs - rhs` over `x, y, f, g, h, l, P, Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrintedForm {
    pub text: String,
    pub residual: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixtureStage {
    /// This stage's map alone.
    pub transformation: ComplexPointTransformation,
    /// All maps up to and including this stage.
    pub composite: ComplexPointTransformation,
    pub target: Code,
    pub family: Option<SolutionFamily>,
    pub printed_complex: Option<ComplexPointTransformation>,
    pub printed_transformation: Option<RealPointTransformation>,
    pub printed_target: Vec<PrintedForm>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fixture {
    pub name: String,
    pub summary: String,
    pub expected: Verdict,
    pub code: Code,
    pub symmetries: Vec<ComplexVectorField>,
    pub printed_symmetries: Vec<(RealVectorField, RealVectorField)>,
    pub stated_case: Option<TheoremCase>,
    pub printed_source: Vec<PrintedForm>,
    pub stages: Vec<FixtureStage>,
    pub family: Option<SolutionFamily>,
    pub notes: Vec<Annotation>,
    file: FixtureFile,
}

fn compile_printed(
    eqs: &[PrintedEquation],
    values: &BTreeMap<String, f64>,
) -> Result<Vec<PrintedForm>, CorpusError> {
    let mut params: Vec<&str> = vec!["P", "Q"];
    params.extend(values.keys().map(String::as_str));
    let alphabet = Alphabet::real(&params);
    let consts: Vec<(String, Expr)> = values
        .iter()
        .map(|(k, v)| (k.clone(), Expr::real(*v)))
        .collect();
    let subs: Vec<(&str, &Expr)> = consts.iter().map(|(k, v)| (k.as_str(), v)).collect();
    eqs.iter()
        .map(|eq| {
            let p = |t: &str| {
                parse(t, &alphabet).map_err(|e| CorpusError::Format(format!("printed `{t}`: {e}")))
            };
            let residual = (&p(&eq.lhs)? - &p(&eq.rhs)?).subs(&subs).rename(&[
                ("X", "x"),
                ("Y", "y"),
                ("F", "f"),
                ("G", "g"),
                ("H", "h"),
                ("L", "l"),
            ]);
            Ok(PrintedForm {
                text: eq.to_string(),
                residual,
            })
        })
        .collect()
}

fn complex_field(f: &FieldFile) -> Result<ComplexVectorField, CorpusError> {
    match f.compile()? {
        Field::Complex(c) => Ok(c),
        Field::Real(_) => Err(CorpusError::Format("symmetries are complex fields".into())),
    }
}

fn real_field(f: &FieldFile) -> Result<RealVectorField, CorpusError> {
    match f.compile()? {
        Field::Real(r) => Ok(r),
        Field::Complex(_) => Err(CorpusError::Format(
            "printed symmetries are real fields".into(),
        )),
    }
}

impl Fixture {
    pub fn from_file(file: FixtureFile) -> Result<Self, CorpusError> {
        let code = file.code.compile()?;
        let symmetries = file
            .symmetries
            .iter()
            .map(complex_field)
            .collect::<Result<Vec<_>, _>>()?;
        let printed_symmetries = file
            .printed_symmetries
            .iter()
            .map(|[x, y]| Ok((real_field(x)?, real_field(y)?)))
            .collect::<Result<Vec<_>, CorpusError>>()?;
        let family = file
            .family
            .clone()
            .map(SolutionFamily::from_file)
            .transpose()?;
        let mut composite = ComplexPointTransformation::identity();
        let mut stages = Vec::new();
        for s in &file.stages {
            let t = match &s.transformation {
                StageTransformFile::Case6 {
                    case6: [a1, a2, b1, b2],
                } => case6_complex(*a1, *a2, *b1, *b2)?,
                StageTransformFile::Map(m) => match m.compile()? {
                    Transformation::Complex(c) => c,
                    Transformation::Real(_) => {
                        return Err(CorpusError::Format("stage maps are complex".into()))
                    }
                },
            };
            composite = t.after(&composite);
            let stage_family = match (&family, &s.z_of_big_z) {
                (Some(f), z) => {
                    let mut ff = f.file().clone();
                    ff.z_of_big_z = z.clone();
                    Some(SolutionFamily::from_file(ff)?)
                }
                (None, _) => None,
            };
            let printed_complex = match s
                .printed_complex
                .as_ref()
                .map(TransformFile::compile)
                .transpose()?
            {
                Some(Transformation::Complex(c)) => Some(c),
                None => None,
                Some(_) => {
                    return Err(CorpusError::Format(
                        "printed_complex must be complex".into(),
                    ))
                }
            };
            let printed_transformation = match s
                .printed_transformation
                .as_ref()
                .map(TransformFile::compile)
                .transpose()?
            {
                Some(Transformation::Real(r)) => Some(r),
                None => None,
                Some(_) => {
                    return Err(CorpusError::Format(
                        "printed_transformation must be real".into(),
                    ))
                }
            };
            stages.push(FixtureStage {
                transformation: t,
                composite: composite.clone(),
                target: s.target.compile()?,
                family: stage_family,
                printed_complex,
                printed_transformation,
                printed_target: compile_printed(
                    s.printed_target.as_deref().unwrap_or(&[]),
                    &file.printed_values,
                )?,
            });
        }
        Ok(Fixture {
            name: file.name.clone(),
            summary: file.summary.clone(),
            expected: file.expected,
            code,
            symmetries,
            printed_symmetries,
            stated_case: file.stated_case,
            printed_source: compile_printed(
                file.printed_source.as_deref().unwrap_or(&[]),
                &file.printed_values,
            )?,
            stages,
            family,
            notes: file.notes.clone(),
            file,
        })
    }

    pub fn from_json(json: &str) -> Result<Self, CorpusError> {
        let file: FixtureFile =
            serde_json::from_str(json).map_err(|e| CorpusError::Format(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn file(&self) -> &FixtureFile {
        &self.file
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.file).expect("fixture files serialize") + "\n"
    }

    /// Composite map of every stage.
    pub fn transformation(&self) -> Option<&ComplexPointTransformation> {
        self.stages.last().map(|s| &s.composite)
    }
}

pub fn list_fixtures() -> Vec<&'static str> {
    FIXTURE_NAMES.to_vec()
}

pub fn fixture_source(name: &str) -> Result<&'static str, CorpusError> {
    FIXTURE_NAMES
        .iter()
        .position(|n| *n == name)
        .map(|i| SOURCES[i])
        .ok_or_else(|| CorpusError::UnknownFixture(name.to_string()))
}

pub fn load_fixture(name: &str) -> Result<Fixture, CorpusError> {
    Fixture::from_json(fixture_source(name)?)
}

/// Every `*.json` fixture in `dir`, sorted by name.
pub fn load_fixture_dir(dir: &Path) -> Result<Vec<Fixture>, CorpusError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| Fixture::from_json(&std::fs::read_to_string(p)?))
        .collect()
}

/// Writes the shipped fixtures to `dir` as `NAME.json`.
pub fn export_fixtures(dir: &Path) -> Result<(), CorpusError> {
    std::fs::create_dir_all(dir)?;
    for (name, src) in FIXTURE_NAMES.iter().zip(SOURCES) {
        std::fs::write(dir.join(format!("{name}.json")), src)?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub samples: usize,
    pub tol: f64,
    pub grid: GridSpec,
    /// First flow step; the second is half of it.
    pub flow_epsilon: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: crate::expr::DEFAULT_SEED,
            samples: crate::expr::DEFAULT_SAMPLES,
            tol: crate::expr::DEFAULT_TOL,
            grid: GridSpec::default(),
            flow_epsilon: 1e-3,
        }
    }
}

impl RunConfig {
    pub fn sampler(&self) -> Sampler {
        Sampler::new(
            SamplerConfig::default()
                .with_seed(self.seed)
                .with_samples(self.samples),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymmetryCheck {
    pub index: usize,
    #[serde(serialize_with = "crate::report::display")]
    pub field: ComplexVectorField,
    pub is_symmetry: bool,
    pub max_relative: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowInvarianceReport>,
}

impl SymmetryCheck {
    pub fn passed(&self) -> bool {
        self.is_symmetry && self.flow.as_ref().is_none_or(|f| f.is_symmetry)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageReport {
    pub index: usize,
    pub ode: VerificationReport,
    pub pde: VerificationReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixtureReport {
    pub name: String,
    pub expected: Verdict,
    pub lie: LieConditionReport,
    pub symmetries: Vec<SymmetryCheck>,
    pub classification: Option<CaseClassification>,
    pub stages: Vec<StageReport>,
    pub annotations: Vec<Annotation>,
}

impl FixtureReport {
    pub fn verdict(&self) -> Verdict {
        self.lie.verdict
    }

    /// The lie verdict is the expected one.
    pub fn matched(&self) -> bool {
        self.lie.verdict == self.expected
    }

    /// Every check ran and passed, including the lie check itself.
    pub fn verified(&self) -> bool {
        self.lie.verdict == Verdict::Linearizable
            && self.symmetries.iter().all(SymmetryCheck::passed)
            && self.stages.iter().all(|s| s.ode.passed() && s.pde.passed())
    }

    /// Expected outcome: a linearizable fixture verifies, any other stops
    /// after the lie check with the expected verdict.
    pub fn passed(&self) -> bool {
        self.matched() && (self.expected != Verdict::Linearizable || self.verified())
    }

    pub fn json_lines(&self) -> Vec<String> {
        let tag = |mut v: serde_json::Value| {
            v["fixture"] = json!(self.name);
            v.to_string()
        };
        let mut out = vec![tag(json!({
            "kind": "fixture",
            "expected": self.expected,
            "verdict": self.verdict(),
            "matched": self.matched(),
            "verified": self.verified(),
            "passed": self.passed(),
        }))];
        for l in self.lie.json_lines() {
            out.push(tag(serde_json::from_str(&l).expect("report lines are JSON")));
        }
        for s in &self.symmetries {
            out.push(tag(json!({"kind": "symmetry", "check": s})));
        }
        if let Some(c) = &self.classification {
            out.push(tag(c.json_value()));
        }
        for s in &self.stages {
            for (level, r) in [("ode", &s.ode), ("pde", &s.pde)] {
                for st in &r.stages {
                    out.push(tag(json!({
                        "kind": "verification-stage",
                        "stage": s.index,
                        "level": level,
                        "result": st,
                    })));
                }
            }
        }
        for a in &self.annotations {
            out.push(tag(json!({"kind": "annotation", "annotation": a})));
        }
        out
    }
}

impl Report for FixtureReport {
    fn text(&self) -> String {
        let mut out = format!(
            "== {}: {} (expected {}) {}\n",
            self.name,
            self.verdict().label(),
            self.expected.label(),
            if self.passed() { "PASS" } else { "FAIL" }
        );
        if let Some(r) = &self.lie.reason {
            out += &format!("  lie: {r}\n");
        }
        for c in self.lie.complex.iter().chain(&self.lie.real) {
            out += &format!(
                "  condition {:<6} {} (max rel {})\n",
                c.name,
                if c.is_zero { "= 0" } else { "!= 0" },
                num(c.max_relative)
            );
        }
        for s in &self.symmetries {
            out += &format!(
                "  symmetry {} [{}]: {}{}\n",
                s.index + 1,
                s.field,
                if s.is_symmetry {
                    "determining equation holds"
                } else {
                    "NOT a symmetry"
                },
                match &s.flow {
                    Some(f) => match f.ratio {
                        Some(r) => format!(", flow ratio {r:.3}"),
                        None => ", flow exact".into(),
                    },
                    None => String::new(),
                }
            );
        }
        if let Some(c) = &self.classification {
            out += &format!("  {}", c.text());
        }
        for s in &self.stages {
            for r in [&s.ode, &s.pde] {
                for line in r.text().lines() {
                    out += &format!("  [stage {}] {line}\n", s.index + 1);
                }
            }
        }
        for a in &self.annotations {
            out += &format!("  {a}\n");
        }
        out
    }

    fn json_value(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.json_lines()
                .iter()
                .map(|l| serde_json::from_str(l).unwrap())
                .collect(),
        )
    }
}

/// Printed equations against `sys`: all hold up to the operator weight, or
/// each failing one is a typo.
fn compare_printed_system(
    printed: &[PrintedForm],
    code: &Code,
    what: &str,
    sampler: &Sampler,
    tol: f64,
) -> Result<Vec<Annotation>, CorpusError> {
    if printed.is_empty() {
        return Ok(Vec::new());
    }
    let sys = decompose(code);
    let mut bad = Vec::new();
    for (k, p) in printed.iter().enumerate() {
        let e = p.residual.subs(&[("P", &sys.rhs_re), ("Q", &sys.rhs_im)]);
        if !equiv_zero(&e, &mut sampler.fork(k as u64), tol)?.is_zero {
            bad.push(p);
        }
    }
    let (o1, o2) = sys.operator_text();
    Ok(if bad.is_empty() {
        vec![Annotation::new(
            AnnotationKind::WeightConvention,
            format!("{what}: {}", printed.iter().map(|p| p.text.as_str()).collect::<Vec<_>>().join("; ")),
            format!(
                "holds with P = {o1}, Q = {o2} read as the real and imaginary parts of the derivative; the exact operators carry weight {}",
                sys.convention_weight
            ),
        )]
    } else {
        bad.into_iter()
            .map(|p| {
                Annotation::new(
                    AnnotationKind::Typo,
                    format!("{what}: {}", p.text),
                    "does not follow from the complex equation under any uniform weight",
                )
            })
            .collect()
    })
}

fn field_differs(
    a: &RealVectorField,
    b: &RealVectorField,
    sign: f64,
    sampler: &Sampler,
    tol: f64,
) -> Result<Vec<&'static str>, CorpusError> {
    let mut out = Vec::new();
    for (k, (name, (p, q))) in ["x", "y", "f", "g"]
        .into_iter()
        .zip(a.components().into_iter().zip(b.components()))
        .enumerate()
    {
        let e = p - &q.clone().scale(sign);
        if !equiv_zero(&e, &mut sampler.fork(k as u64), tol)?.is_zero {
            out.push(name);
        }
    }
    Ok(out)
}

fn compare_printed_fields(
    f: &Fixture,
    sampler: &Sampler,
    tol: f64,
) -> Result<Vec<Annotation>, CorpusError> {
    let mut out = Vec::new();
    for (i, (z, (px, py))) in f.symmetries.iter().zip(&f.printed_symmetries).enumerate() {
        let (x, y) = realify_field(z);
        for (label, exact, printed) in [("X", &x, px), ("Y", &y, py)] {
            let s = sampler.fork(10 * i as u64 + if label == "X" { 0 } else { 5 });
            let diff = field_differs(printed, exact, 1.0, &s, tol)?;
            if diff.is_empty() {
                continue;
            }
            let text = format!("{label}{} = {}", i + 1, field_text(printed));
            if field_differs(printed, exact, -1.0, &s, tol)?.is_empty() {
                out.push(Annotation::new(
                    AnnotationKind::WeightConvention,
                    text,
                    format!(
                        "printed with the opposite overall sign; realification gives {}",
                        field_text(exact)
                    ),
                ));
            } else {
                out.push(Annotation::new(
                    AnnotationKind::Typo,
                    text,
                    format!(
                        "{} component(s) {} differ; realification gives {}",
                        diff.len(),
                        diff.join(", "),
                        field_text(exact)
                    ),
                ));
            }
        }
    }
    Ok(out)
}

fn field_text(v: &RealVectorField) -> String {
    let mut parts = Vec::new();
    for (name, c) in ["x", "y", "f", "g"].into_iter().zip(v.components()) {
        if !c.is_zero() {
            parts.push(format!("({c}) d/d{name}"));
        }
    }
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" + ")
    }
}

/// Real and complex grid points of a family: `(x, y, f, g)` bindings and the
/// matching `z` bindings.
fn family_points(fam: &SolutionFamily, grid: GridSpec) -> Vec<(Binding, Binding)> {
    let mut out = Vec::new();
    for t in 0..grid.tuples {
        for b in fam.grid(grid.nx, grid.ny, t, &[&fam.u]) {
            let z = b.get("z").expect("grid binds z");
            let Ok(u) = fam.u.eval::<f64>(&b) else {
                continue;
            };
            let mut r = b.clone();
            r.remove("z");
            for (k, v) in [("x", z.re), ("y", z.im), ("f", u.re), ("g", u.im)] {
                r.set(k, Complex64::new(v, 0.0));
            }
            out.push((r, b));
        }
    }
    out
}

/// Components of `printed` that disagree with `exact` at the points.
fn differs_at(exact: &[&Expr], printed: &[&Expr], points: &[Binding], tol: f64) -> Vec<usize> {
    let mut out = Vec::new();
    for (k, (e, p)) in exact.iter().zip(printed).enumerate() {
        let d = *e - *p;
        let bad = points.iter().any(|b| match d.eval_scaled::<f64>(b) {
            Ok((v, m)) => v.norm() > tol * (1.0 + m),
            Err(_) => false,
        });
        if bad {
            out.push(k);
        }
    }
    out
}

fn compare_printed_maps(
    stage: &FixtureStage,
    index: usize,
    grid: GridSpec,
    tol: f64,
) -> Vec<Annotation> {
    let Some(fam) = &stage.family else {
        return Vec::new();
    };
    let pts = family_points(fam, grid);
    let real: Vec<Binding> = pts.iter().map(|(r, _)| r.clone()).collect();
    let cplx: Vec<Binding> = pts
        .iter()
        .map(|(_, c)| {
            let mut c = c.clone();
            c.set("u", fam.u.eval::<f64>(&c).expect("grid points evaluate"));
            c
        })
        .collect();
    let mut out = Vec::new();
    if let Some(p) = &stage.printed_complex {
        let c = &stage.composite;
        let bad = differs_at(&[&c.big_z, &c.big_u], &[&p.big_z, &p.big_u], &cplx, tol);
        let names = ["Z", "U"];
        if !bad.is_empty() {
            out.push(Annotation::new(
                AnnotationKind::Typo,
                format!(
                    "stage {} complex map: Z = {}, U = {}",
                    index + 1,
                    p.big_z,
                    p.big_u
                ),
                format!(
                    "{} differ from the composed map",
                    bad.iter().map(|k| names[*k]).collect::<Vec<_>>().join(", ")
                ),
            ));
        }
    }
    if let Some(p) = &stage.printed_transformation {
        let exact = realify_transformation(&stage.composite);
        let bad = differs_at(&exact.components(), &p.components(), &real, tol);
        let names = ["X", "Y", "F", "G"];
        for k in bad {
            out.push(Annotation::new(
                AnnotationKind::Typo,
                format!("stage {} real map: {} = {}", index + 1, names[k], p.components()[k]),
                format!(
                    "disagrees with the realified map along the solution family; realification gives {} = {}",
                    names[k],
                    exact.components()[k]
                ),
            ));
        }
    }
    out
}

/// Lie check, then symmetries, classification, and per-stage ODE and PDE
/// verification. A fixture whose lie verdict is not Linearizable stops after
/// the lie check.
pub fn run(f: &Fixture, cfg: &RunConfig) -> Result<FixtureReport, CorpusError> {
    let base = cfg.sampler();
    let lie = check_linearizable(&f.code, &mut base.fork(1), cfg.tol)?;
    let mut annotations = f.notes.clone();
    annotations.extend(lie.annotations.iter().cloned());
    let mut rep = FixtureReport {
        name: f.name.clone(),
        expected: f.expected,
        lie,
        symmetries: Vec::new(),
        classification: None,
        stages: Vec::new(),
        annotations,
    };
    if rep.lie.verdict != Verdict::Linearizable {
        return Ok(rep);
    }
    rep.annotations.extend(compare_printed_system(
        &f.printed_source,
        &f.code,
        "source system",
        &base.fork(2),
        cfg.tol,
    )?);
    rep.annotations.extend(decompose(&f.code).annotations);

    for (i, z) in f.symmetries.iter().enumerate() {
        let test = is_symmetry(z, &f.code, &mut base.fork(100 + i as u64), cfg.tol)?;
        let flow = match &f.family {
            Some(fam) => Some(flow_invariance_check(
                z,
                fam,
                &f.code,
                cfg.flow_epsilon,
                &base.fork(110 + i as u64),
                cfg.samples,
            )?),
            None => None,
        };
        rep.symmetries.push(SymmetryCheck {
            index: i,
            field: z.clone(),
            is_symmetry: test.is_zero,
            max_relative: test.max_relative,
            flow,
        });
    }
    rep.annotations
        .extend(compare_printed_fields(f, &base.fork(120), cfg.tol)?);
    if let [z1, z2] = f.symmetries.as_slice() {
        let c = classify_theorem_case(z1, z2, f.stated_case, &mut base.fork(130), cfg.tol)?;
        rep.classification = Some(c);
    }

    for (i, s) in f.stages.iter().enumerate() {
        let Some(fam) = &s.family else {
            return Err(CorpusError::Format(format!(
                "{}: stages need a solution family",
                f.name
            )));
        };
        let sampler = base.fork(1000 + 10 * i as u64);
        let ode =
            verify_ode_linearization(&f.code, &s.composite, &s.target, fam, &sampler, cfg.tol)?;
        let pde = verify_pde_linearization(
            &decompose(&f.code),
            &realify_transformation(&s.composite),
            Some(&s.composite),
            &decompose(&s.target),
            fam,
            cfg.grid,
            cfg.tol,
        )?;
        rep.annotations.extend(pde.annotations.iter().cloned());
        rep.annotations
            .extend(compare_printed_maps(s, i, cfg.grid, cfg.tol));
        rep.annotations.extend(compare_printed_system(
            &s.printed_target,
            &s.target,
            &format!("stage {} target system", i + 1),
            &sampler.fork(2),
            cfg.tol,
        )?);
        rep.stages.push(StageReport { index: i, ode, pde });
    }
    Ok(rep)
}

pub fn run_fixture(name: &str, cfg: &RunConfig) -> Result<FixtureReport, CorpusError> {
    run(&load_fixture(name)?, cfg)
}

/// Runs fixtures in parallel; results come back in the order of `names`.
pub fn run_corpus(names: &[&str], cfg: &RunConfig) -> Result<Vec<FixtureReport>, CorpusError> {
    for n in names {
        fixture_source(n)?;
    }
    names.par_iter().map(|n| run_fixture(n, cfg)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSummary {
    pub reports: Vec<FixtureReport>,
}

impl CorpusSummary {
    pub fn all_passed(&self) -> bool {
        self.reports.iter().all(FixtureReport::passed)
    }

    pub fn matches(&self) -> usize {
        self.reports.iter().filter(|r| r.passed()).count()
    }
}

impl Report for CorpusSummary {
    fn text(&self) -> String {
        let mut out = format!(
            "{:<12} {:<16} {:<16} {:<8} result\n",
            "fixture", "expected", "verdict", "checks"
        );
        for r in &self.reports {
            out += &format!(
                "{:<12} {:<16} {:<16} {:<8} {}\n",
                r.name,
                r.expected.label(),
                r.verdict().label(),
                if r.verified() {
                    "pass"
                } else if r.expected == Verdict::Linearizable {
                    "FAIL"
                } else {
                    "-"
                },
                if r.passed() { "PASS" } else { "FAIL" }
            );
        }
        out += &format!(
            "{} of {} fixtures matched\n",
            self.matches(),
            self.reports.len()
        );
        out
    }

    fn json_value(&self) -> serde_json::Value {
        json!({
            "kind": "corpus-summary",
            "fixtures": self.reports.len(),
            "matched": self.matches(),
            "all_passed": self.all_passed(),
        })
    }
}
