//! Point symmetries of complex ODEs: prolongation, brackets, realification
//! of generators and the proportional/commuting case split for a pair.

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::codes::Code;
use crate::expr::{
    equiv_zero, parse, realify, Alphabet, Expr, ParseError, SampleError, Sampler, ZeroTest,
};
use crate::report::{num, Annotation, AnnotationKind, Report};
use crate::transform::SolutionFamily;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymmetryError {
    #[error("second field vanishes identically on the sample region")]
    DegenerateField,
    #[error("{0}")]
    InvalidVariables(String),
    #[error("parse error in `{field}`: {source}")]
    Parse {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("invalid field file: {0}")]
    Format(String),
    #[error(transparent)]
    Sampling(#[from] SampleError),
}

/// `xi d/dz + eta d/du`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVectorField {
    pub xi: Expr,
    pub eta: Expr,
}

impl ComplexVectorField {
    pub fn new(xi: Expr, eta: Expr) -> Result<Self, SymmetryError> {
        for (name, e) in [("xi", &xi), ("eta", &eta)] {
            let bad: Vec<String> = e
                .free_vars()
                .into_iter()
                .filter(|v| v != "z" && v != "u")
                .collect();
            if !bad.is_empty() {
                return Err(SymmetryError::InvalidVariables(format!(
                    "{name} uses {} besides z, u",
                    bad.join(", ")
                )));
            }
        }
        Ok(ComplexVectorField { xi, eta })
    }

    pub fn parse(xi: &str, eta: &str) -> Result<Self, SymmetryError> {
        let a = Alphabet::complex::<&str>(&[]);
        let p = |field: &str, t: &str| {
            parse(t, &a).map_err(|source| SymmetryError::Parse {
                field: field.into(),
                source,
            })
        };
        Self::new(p("xi", xi)?, p("eta", eta)?)
    }

    /// Applies the field to a function of `(z, u)`.
    pub fn apply(&self, e: &Expr) -> Expr {
        &(&self.xi * &e.diff("z")) + &(&self.eta * &e.diff("u"))
    }

    pub fn scaled(&self, k: &Expr) -> ComplexVectorField {
        ComplexVectorField {
            xi: k * &self.xi,
            eta: k * &self.eta,
        }
    }

    pub fn to_file(&self) -> FieldFile {
        FieldFile::Complex {
            xi: self.xi.to_string(),
            eta: self.eta.to_string(),
        }
    }
}

impl std::fmt::Display for ComplexVectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({})*d/dz + ({})*d/du", self.xi, self.eta)
    }
}

/// `x d/dx + y d/dy + f d/df + g d/dg` with the components as named.
#[derive(Clone, Debug, PartialEq)]
pub struct RealVectorField {
    pub x: Expr,
    pub y: Expr,
    pub f: Expr,
    pub g: Expr,
}

const REAL_COORDS: [&str; 4] = ["x", "y", "f", "g"];

impl RealVectorField {
    pub fn new(x: Expr, y: Expr, f: Expr, g: Expr) -> Result<Self, SymmetryError> {
        for e in [&x, &y, &f, &g] {
            let bad: Vec<String> = e
                .free_vars()
                .into_iter()
                .filter(|v| !REAL_COORDS.contains(&v.as_str()))
                .collect();
            if !bad.is_empty() {
                return Err(SymmetryError::InvalidVariables(format!(
                    "real field uses {} besides x, y, f, g",
                    bad.join(", ")
                )));
            }
        }
        Ok(RealVectorField { x, y, f, g })
    }

    pub fn parse(x: &str, y: &str, f: &str, g: &str) -> Result<Self, SymmetryError> {
        let a = Alphabet::real::<&str>(&[]);
        let p = |field: &str, t: &str| {
            parse(t, &a).map_err(|source| SymmetryError::Parse {
                field: field.into(),
                source,
            })
        };
        Self::new(p("x", x)?, p("y", y)?, p("f", f)?, p("g", g)?)
    }

    pub fn components(&self) -> [&Expr; 4] {
        [&self.x, &self.y, &self.f, &self.g]
    }

    pub fn apply(&self, e: &Expr) -> Expr {
        Expr::sum(
            self.components()
                .iter()
                .zip(REAL_COORDS)
                .map(|(c, s)| *c * &e.diff(s))
                .collect(),
        )
    }

    pub fn bracket(&self, other: &RealVectorField) -> RealVectorField {
        let c = |a: &Expr, b: &Expr| &self.apply(b) - &other.apply(a);
        RealVectorField {
            x: c(&self.x, &other.x),
            y: c(&self.y, &other.y),
            f: c(&self.f, &other.f),
            g: c(&self.g, &other.g),
        }
    }

    pub fn sub(&self, other: &RealVectorField) -> RealVectorField {
        RealVectorField {
            x: &self.x - &other.x,
            y: &self.y - &other.y,
            f: &self.f - &other.f,
            g: &self.g - &other.g,
        }
    }

    pub fn add(&self, other: &RealVectorField) -> RealVectorField {
        RealVectorField {
            x: &self.x + &other.x,
            y: &self.y + &other.y,
            f: &self.f + &other.f,
            g: &self.g + &other.g,
        }
    }

    pub fn scale(&self, k: f64) -> RealVectorField {
        RealVectorField {
            x: self.x.clone().scale(k),
            y: self.y.clone().scale(k),
            f: self.f.clone().scale(k),
            g: self.g.clone().scale(k),
        }
    }

    pub fn to_file(&self) -> FieldFile {
        FieldFile::Real {
            x: self.x.to_string(),
            y: self.y.to_string(),
            f: self.f.to_string(),
            g: self.g.to_string(),
        }
    }
}

impl std::fmt::Display for RealVectorField {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            fm,
            "({})*d/dx + ({})*d/dy + ({})*d/df + ({})*d/dg",
            self.x, self.y, self.f, self.g
        )
    }
}

/// On-disk form of a vector field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldFile {
    Complex {
        xi: String,
        eta: String,
    },
    Real {
        x: String,
        y: String,
        f: String,
        g: String,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Complex(ComplexVectorField),
    Real(RealVectorField),
}

impl FieldFile {
    pub fn compile(&self) -> Result<Field, SymmetryError> {
        match self {
            FieldFile::Complex { xi, eta } => {
                ComplexVectorField::parse(xi, eta).map(Field::Complex)
            }
            FieldFile::Real { x, y, f, g } => RealVectorField::parse(x, y, f, g).map(Field::Real),
        }
    }
}

pub fn load_field(json: &str) -> Result<Field, SymmetryError> {
    let file: FieldFile =
        serde_json::from_str(json).map_err(|e| SymmetryError::Format(e.to_string()))?;
    file.compile()
}

/// `(X, Y)`: the realified field and the realified `-i` times the field.
pub fn realify_field(z: &ComplexVectorField) -> (RealVectorField, RealVectorField) {
    let r = |e: &Expr| realify(e).expect("field components are analytic");
    let mi = Expr::imag_unit().neg();
    let (x1, x2) = r(&z.xi);
    let (f1, f2) = r(&z.eta);
    let (y1, y2) = r(&(&mi * &z.xi));
    let (g1, g2) = r(&(&mi * &z.eta));
    (
        RealVectorField {
            x: x1,
            y: x2,
            f: f1,
            g: f2,
        },
        RealVectorField {
            x: y1,
            y: y2,
            f: g1,
            g: g2,
        },
    )
}

/// Determining-equation residual of `field` for `u'' = w(z, u, up)`:
/// `eta2 - (xi w_z + eta w_u + eta1 w_up)`.
pub fn prolong_residual(field: &ComplexVectorField, w: &Expr) -> Expr {
    let up = Expr::var("up");
    let total = |e: &Expr| Expr::sum(vec![e.diff("z"), &up * &e.diff("u"), w * &e.diff("up")]);
    let dxi = total(&field.xi);
    let eta1 = &total(&field.eta) - &(&up * &dxi);
    let eta2 = &total(&eta1) - &(w * &dxi);
    &eta2
        - &Expr::sum(vec![
            &field.xi * &w.diff("z"),
            &field.eta * &w.diff("u"),
            &eta1 * &w.diff("up"),
        ])
}

/// Prolongation residual for a first-order code `u' = w(z, u)`:
/// `eta1 - (xi w_z + eta w_u)`.
pub fn prolong_residual_first(field: &ComplexVectorField, w: &Expr) -> Expr {
    let up = w.clone();
    let total = |e: &Expr| &e.diff("z") + &(&up * &e.diff("u"));
    let eta1 = &total(&field.eta) - &(&up * &total(&field.xi));
    &eta1 - &(&(&field.xi * &w.diff("z")) + &(&field.eta * &w.diff("u")))
}

pub fn symmetry_residual(field: &ComplexVectorField, code: &Code) -> Expr {
    match code {
        Code::First(c) => prolong_residual_first(field, &c.w),
        _ => prolong_residual(field, &code.rhs()),
    }
}

/// Zero test of the determining equation over `(z, u, up)`.
pub fn is_symmetry(
    field: &ComplexVectorField,
    code: &Code,
    sampler: &mut Sampler,
    tol: f64,
) -> Result<ZeroTest, SymmetryError> {
    Ok(equiv_zero(&symmetry_residual(field, code), sampler, tol)?)
}

pub fn bracket(z1: &ComplexVectorField, z2: &ComplexVectorField) -> ComplexVectorField {
    ComplexVectorField {
        xi: &z1.apply(&z2.xi) - &z2.apply(&z1.xi),
        eta: &z1.apply(&z2.eta) - &z2.apply(&z1.eta),
    }
}

fn vanishes(e: &Expr, sampler: &mut Sampler, tol: f64) -> Result<bool, SampleError> {
    if e.is_zero() {
        return Ok(true);
    }
    Ok(equiv_zero(e, sampler, tol)?.is_zero)
}

/// `n / d` with common factors struck out.
fn cancel(n: &Expr, d: &Expr) -> Expr {
    fn factors(e: &Expr, up: bool, num: &mut Vec<Expr>, den: &mut Vec<Expr>) {
        match e {
            Expr::Product(cs) => cs.iter().for_each(|c| factors(c, up, num, den)),
            Expr::Quot(a, b) => {
                factors(a, up, num, den);
                factors(b, !up, num, den);
            }
            _ if up => num.push(e.clone()),
            _ => den.push(e.clone()),
        }
    }
    let (mut num, mut den) = (Vec::new(), Vec::new());
    factors(n, true, &mut num, &mut den);
    factors(d, false, &mut num, &mut den);
    den.retain(|f| match num.iter().position(|g| g == f) {
        Some(i) => {
            num.remove(i);
            false
        }
        None => true,
    });
    Expr::quot(Expr::product(num), Expr::product(den))
}

/// `Z1 = rho Z2` test.
#[derive(Clone, Debug, PartialEq)]
pub struct Proportionality {
    pub rho: Option<Expr>,
    pub constant: bool,
}

pub fn proportionality(
    z1: &ComplexVectorField,
    z2: &ComplexVectorField,
    sampler: &mut Sampler,
    tol: f64,
) -> Result<Proportionality, SymmetryError> {
    let xi2_zero = vanishes(&z2.xi, &mut sampler.fork(1), tol)?;
    let eta2_zero = vanishes(&z2.eta, &mut sampler.fork(2), tol)?;
    if xi2_zero && eta2_zero {
        return Err(SymmetryError::DegenerateField);
    }
    let cross = &(&z1.xi * &z2.eta) - &(&z1.eta * &z2.xi);
    if !vanishes(&cross, &mut sampler.fork(3), tol)? {
        return Ok(Proportionality {
            rho: None,
            constant: false,
        });
    }
    let rho = if xi2_zero {
        cancel(&z1.eta, &z2.eta)
    } else {
        cancel(&z1.xi, &z2.xi)
    };
    let consistent = vanishes(&(&(&rho * &z2.xi) - &z1.xi), &mut sampler.fork(4), tol)?
        && vanishes(&(&(&rho * &z2.eta) - &z1.eta), &mut sampler.fork(5), tol)?;
    if !consistent {
        return Ok(Proportionality {
            rho: None,
            constant: false,
        });
    }
    let constant = vanishes(&rho.diff("z"), &mut sampler.fork(6), tol)?
        && vanishes(&rho.diff("u"), &mut sampler.fork(7), tol)?;
    Ok(Proportionality {
        rho: Some(rho),
        constant,
    })
}

/// Which of the four symmetry-pair cases a pair falls into.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TheoremCase {
    Case3,
    Case4,
    Case5,
    Case6,
}

impl TheoremCase {
    /// Case 3: proportional and commuting; 4: proportional only;
    /// 5: commuting only; 6: neither.
    pub fn from_flags(proportional: bool, commuting: bool) -> TheoremCase {
        match (proportional, commuting) {
            (true, true) => TheoremCase::Case3,
            (true, false) => TheoremCase::Case4,
            (false, true) => TheoremCase::Case5,
            (false, false) => TheoremCase::Case6,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            TheoremCase::Case3 => 3,
            TheoremCase::Case4 => 4,
            TheoremCase::Case5 => 5,
            TheoremCase::Case6 => 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseClassification {
    /// Proportional with a nonconstant factor.
    pub proportional: bool,
    pub rho: Option<Expr>,
    pub rho_constant: bool,
    pub commuting: bool,
    pub bracket: ComplexVectorField,
    pub case: TheoremCase,
    pub stated: Option<TheoremCase>,
    pub discrepancy: Option<Annotation>,
}

pub fn classify_theorem_case(
    z1: &ComplexVectorField,
    z2: &ComplexVectorField,
    stated: Option<TheoremCase>,
    sampler: &mut Sampler,
    tol: f64,
) -> Result<CaseClassification, SymmetryError> {
    let prop = proportionality(z1, z2, &mut sampler.fork(100), tol)?;
    let br = bracket(z1, z2);
    let commuting = vanishes(&br.xi, &mut sampler.fork(200), tol)?
        && vanishes(&br.eta, &mut sampler.fork(201), tol)?;
    let proportional = prop.rho.is_some() && !prop.constant;
    let case = TheoremCase::from_flags(proportional, commuting);
    let discrepancy = stated.filter(|s| *s != case).map(|s| {
        Annotation::new(
            AnnotationKind::ClassificationDiscrepancy,
            format!("stated: condition {}", s.number()),
            format!(
                "computed case {} ({}proportional, {}commuting)",
                case.number(),
                if proportional { "" } else { "not " },
                if commuting { "" } else { "not " }
            ),
        )
    });
    Ok(CaseClassification {
        proportional,
        rho: prop.rho,
        rho_constant: prop.constant,
        commuting,
        bracket: br,
        case,
        stated,
        discrepancy,
    })
}

impl Report for CaseClassification {
    fn text(&self) -> String {
        let mut s = format!("case {}", self.case.number());
        match &self.rho {
            Some(r) => {
                s += &format!(
                    ": Z1 = rho Z2 with rho = {r}{}",
                    if self.rho_constant { " (constant)" } else { "" }
                )
            }
            None => s += ": not proportional",
        }
        s += &format!(
            "; [Z1, Z2] = {}\n",
            if self.commuting {
                "0".to_string()
            } else {
                self.bracket.to_string()
            }
        );
        if let Some(d) = &self.discrepancy {
            s += &format!("  {d}\n");
        }
        s
    }

    fn json_value(&self) -> serde_json::Value {
        json!({
            "kind": "classification",
            "case": self.case,
            "stated": self.stated,
            "proportional": self.proportional,
            "rho": self.rho.as_ref().map(|r| r.to_string()),
            "rho_constant": self.rho_constant,
            "commuting": self.commuting,
            "bracket": {"xi": self.bracket.xi.to_string(), "eta": self.bracket.eta.to_string()},
            "discrepancy": self.discrepancy,
        })
    }
}

/// Ratio band for the `O(eps^2)` law.
pub const FLOW_RATIO: f64 = 4.0;
pub const FLOW_RATIO_SLACK: f64 = 0.8;
/// Residual level treated as exact invariance.
pub const FLOW_EXACT: f64 = 1e-11;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowInvarianceReport {
    pub epsilons: [f64; 2],
    /// Largest code residual of the perturbed family at each epsilon.
    pub residuals: [f64; 2],
    pub ratio: Option<f64>,
    /// Both residuals at rounding level: the perturbation stays in the
    /// solution set exactly.
    pub exact: bool,
    pub is_symmetry: bool,
    pub samples: usize,
}

impl Report for FlowInvarianceReport {
    fn text(&self) -> String {
        let verdict = if self.is_symmetry {
            "symmetry"
        } else {
            "NOT a symmetry"
        };
        match self.ratio {
            Some(r) => format!(
                "flow invariance: residuals {} / {} at eps {} / {}, ratio {:.3} -> {verdict}\n",
                num(self.residuals[0]),
                num(self.residuals[1]),
                self.epsilons[0],
                self.epsilons[1],
                r
            ),
            None => format!(
                "flow invariance: residual at rounding level ({}), exact -> {verdict}\n",
                num(self.residuals[0].max(self.residuals[1]))
            ),
        }
    }

    fn json_value(&self) -> serde_json::Value {
        json!({"kind": "flow-invariance", "report": self})
    }
}

/// Perturbs the family to first order along `field` in characteristic form,
/// `u + eps (eta - u' xi)`, and compares the code residual at `eps` and
/// `eps / 2`.
pub fn flow_invariance_check(
    field: &ComplexVectorField,
    family: &SolutionFamily,
    code: &Code,
    eps: f64,
    sampler: &Sampler,
    samples: usize,
) -> Result<FlowInvarianceReport, SymmetryError> {
    let u = &family.u;
    let up = family.up();
    let on = |e: &Expr| e.subs(&[("u", u)]);
    let q = &on(&field.eta) - &(&up * &on(&field.xi));
    let e = Expr::var("epsilon");
    let perturbed = u + &(&e * &q);
    let residual = code.residual_along(&perturbed);
    let eps_pair = [eps, eps / 2.0];
    let at: Vec<Expr> = eps_pair
        .iter()
        .map(|v| residual.subs(&[("epsilon", &Expr::real(*v))]))
        .collect();
    let points = family.draw(sampler, &[&at[0], &at[1], &q], samples)?;
    let mut res = [0.0f64; 2];
    let mut scale = 0.0f64;
    for b in &points {
        for k in 0..2 {
            let (v, m) = at[k]
                .eval_scaled::<f64>(b)
                .expect("accepted sample evaluates");
            res[k] = res[k].max(v.norm());
            scale = scale.max(m);
        }
    }
    let exact = res[0].max(res[1]) <= FLOW_EXACT * (1.0 + scale);
    let ratio = (!exact).then(|| res[0] / res[1]);
    let is_symmetry = exact || ratio.is_some_and(|r| (r - FLOW_RATIO).abs() <= FLOW_RATIO_SLACK);
    Ok(FlowInvarianceReport {
        epsilons: eps_pair,
        residuals: res,
        ratio,
        exact,
        is_symmetry,
        samples: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::GeneralSecondOrderCode;
    use crate::expr::DEFAULT_TOL;

    fn field(xi: &str, eta: &str) -> ComplexVectorField {
        ComplexVectorField::parse(xi, eta).unwrap()
    }

    fn real(x: &str, y: &str, f: &str, g: &str) -> RealVectorField {
        RealVectorField::parse(x, y, f, g).unwrap()
    }

    fn zero(e: &Expr) -> bool {
        equiv_zero(e, &mut Sampler::with_seed(17), DEFAULT_TOL)
            .unwrap()
            .is_zero
    }

    fn same(a: &RealVectorField, b: &RealVectorField) -> bool {
        a.components()
            .iter()
            .zip(b.components())
            .all(|(p, q)| zero(&(*p - q)))
    }

    fn w(t: &str) -> Expr {
        parse(t, &Alphabet::complex::<&str>(&[])).unwrap()
    }

    #[test]
    fn realified_scaling_field() {
        let (x, y) = realify_field(&field("z", "-u"));
        assert!(same(&x, &real("x", "y", "-f", "-g")));
        assert!(same(&y, &real("y", "-x", "-g", "f")));
    }

    #[test]
    fn realified_reciprocal_field() {
        let (x, y) = realify_field(&field("1/z", "0"));
        assert!(same(&x, &real("x/(x^2+y^2)", "-y/(x^2+y^2)", "0", "0")));
        assert!(same(&y, &real("-y/(x^2+y^2)", "-x/(x^2+y^2)", "0", "0")));
        let (x, y) = realify_field(&field("1", "0"));
        assert!(same(&x, &real("1", "0", "0", "0")));
        assert!(same(&y, &real("0", "-1", "0", "0")));
    }

    #[test]
    fn translation_is_a_symmetry_of_the_oscillator_but_not_of_u_pp_equals_z() {
        let r = prolong_residual(&field("1", "0"), &w("-3*u*up - u^3"));
        assert!(zero(&r));
        let r = prolong_residual(&field("1", "0"), &w("z"));
        assert!(zero(&(&r + &Expr::one())));
    }

    #[test]
    fn brackets() {
        let z1 = field("z*u", "0");
        assert_eq!(
            bracket(&field("0", "z*u"), &field("0", "u")).xi,
            Expr::zero()
        );
        assert!(zero(&bracket(&field("0", "z*u"), &field("0", "u")).eta));
        let b = bracket(&field("1", "0"), &field("z", "-u"));
        assert!(zero(&(&b.xi - &Expr::one())) && zero(&b.eta));
        let b = bracket(&z1, &z1);
        assert!(zero(&b.xi) && zero(&b.eta));
    }

    #[test]
    fn proportionality_cases() {
        let mut s = Sampler::with_seed(3);
        let p = proportionality(&field("0", "z*u"), &field("0", "u"), &mut s, DEFAULT_TOL).unwrap();
        assert!(zero(&(&p.rho.unwrap() - &w("z"))) && !p.constant);
        let p = proportionality(&field("1", "0"), &field("z", "-u"), &mut s, DEFAULT_TOL).unwrap();
        assert!(p.rho.is_none());
        let p = proportionality(
            &field("z", "u^2"),
            &field("2*z", "2*u^2"),
            &mut s,
            DEFAULT_TOL,
        )
        .unwrap();
        assert!(zero(&(&p.rho.unwrap() - &Expr::real(0.5))) && p.constant);
        assert_eq!(
            proportionality(&field("1", "0"), &field("0", "0"), &mut s, DEFAULT_TOL),
            Err(SymmetryError::DegenerateField)
        );
    }

    #[test]
    fn case_table_is_a_pure_function_of_the_flags() {
        assert_eq!(TheoremCase::from_flags(true, true), TheoremCase::Case3);
        assert_eq!(TheoremCase::from_flags(true, false), TheoremCase::Case4);
        assert_eq!(TheoremCase::from_flags(false, true), TheoremCase::Case5);
        assert_eq!(TheoremCase::from_flags(false, false), TheoremCase::Case6);
    }

    #[test]
    fn synthetic_pairs_hit_every_case() {
        let mut s = Sampler::with_seed(8);
        let mut case = |a: (&str, &str), b: (&str, &str)| {
            classify_theorem_case(
                &field(a.0, a.1),
                &field(b.0, b.1),
                None,
                &mut s,
                DEFAULT_TOL,
            )
            .unwrap()
            .case
        };
        assert_eq!(case(("0", "z*u"), ("0", "u")), TheoremCase::Case3);
        assert_eq!(case(("1", "z"), ("z", "z^2")), TheoremCase::Case4);
        assert_eq!(case(("1", "0"), ("0", "1")), TheoremCase::Case5);
        assert_eq!(case(("1", "0"), ("z", "-u")), TheoremCase::Case6);
        // constant factor does not count as proportional
        assert_eq!(case(("1", "0"), ("2", "0")), TheoremCase::Case5);
    }

    #[test]
    fn stated_case_mismatch_is_annotated() {
        let c = classify_theorem_case(
            &field("1", "z"),
            &field("z", "z^2"),
            Some(TheoremCase::Case6),
            &mut Sampler::with_seed(1),
            DEFAULT_TOL,
        )
        .unwrap();
        assert_eq!(c.case, TheoremCase::Case4);
        assert_eq!(
            c.discrepancy.map(|a| a.kind),
            Some(AnnotationKind::ClassificationDiscrepancy)
        );
    }

    #[test]
    fn realification_respects_brackets() {
        let pairs = [
            (field("1", "0"), field("z", "-u")),
            (field("1/z", "0"), field("u/z", "0")),
            (field("1", "z"), field("z", "z^2")),
            (field("0", "z*u"), field("0", "u")),
        ];
        for (a, b) in pairs {
            let (x1, y1) = realify_field(&a);
            let (x2, y2) = realify_field(&b);
            let (xb, yb) = realify_field(&bracket(&a, &b));
            assert!(same(&x1.bracket(&x2), &xb));
            assert!(same(&x1.bracket(&x2).sub(&y1.bracket(&y2)), &xb.scale(2.0)));
            assert!(same(&x1.bracket(&y2).add(&y1.bracket(&x2)), &yb.scale(2.0)));
        }
    }

    #[test]
    fn field_files() {
        let f = load_field(r#"{"xi": "1", "eta": "z"}"#).unwrap();
        assert_eq!(f, Field::Complex(field("1", "z")));
        let f = load_field(r#"{"x": "1", "y": "0", "f": "x", "g": "y"}"#).unwrap();
        assert!(matches!(f, Field::Real(_)));
        assert!(load_field(r#"{"xi": "up", "eta": "0"}"#).is_err());
    }

    #[test]
    fn flow_invariance_distinguishes_symmetries() {
        let fam = SolutionFamily::from_json(
            r#"{"u": "z^3/6 + c1*z + c2", "parameters": {"c1": [-1, 1], "c2": [-1, 1]},
                "region": {"re": [-1, 1], "im": [-1, 1]}}"#,
        )
        .unwrap();
        let code = Code::General(GeneralSecondOrderCode::new(w("z")).unwrap());
        let s = Sampler::with_seed(4);
        let r = flow_invariance_check(&field("1", "0"), &fam, &code, 1e-3, &s, 16).unwrap();
        assert!(!r.is_symmetry);
        // u d/du is not a symmetry of u'' = z either; z d/du is (shifts by a solution of u''=0)
        let r = flow_invariance_check(&field("0", "z"), &fam, &code, 1e-3, &s, 16).unwrap();
        assert!(r.is_symmetry && r.exact);

        let fam = SolutionFamily::from_json(
            r#"{"u": "exp(a + b*z)", "parameters": {"a": [-0.5, 0.5], "b": [-0.5, 0.5]},
                "region": {"re": [-1, 1], "im": [-1, 1]}}"#,
        )
        .unwrap();
        let code = Code::General(GeneralSecondOrderCode::new(w("up^2/u")).unwrap());
        let r = flow_invariance_check(&field("0", "z*u"), &fam, &code, 1e-3, &s, 16).unwrap();
        assert!(r.is_symmetry, "{r:?}");
        assert!((r.ratio.unwrap() - 4.0).abs() < 0.8);
    }
}
