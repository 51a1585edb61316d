//! Linearizability conditions for `u'' = A up^3 + B up^2 + C up + D`.
//!
//! Two complex conditions in `(z, u)`:
//!
//! ```text
//! I:  3A_zz + 3C A_z - 3D A_u + 3A C_z + C_uu - 6A D_u + B C_u - 2B B_z - 2B_zu
//! II: 6D A_z - 3D B_u + 3A D_z + B_zz - 2C_zu - 3B D_u + 3D_uu + 2C C_u - C B_z
//! ```
//!
//! Their real and imaginary parts are built directly from the real
//! coefficient pairs with `K_z = (K1_x + K2_y)/2 + i(K2_x - K1_y)/2` and the
//! same rule in `(f, g)` for `K_u`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::codes::{
    extract_cubic, real_coefficients, Code, CodeError, CubicCode, RealCoefficients,
};
use crate::expr::{
    equiv_zero, parse, realify, Alphabet, Binding, Exclusion, Expr, SampleError, Sampler, ZeroTest,
};
use crate::report::{num, Annotation, AnnotationKind, Report};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LieError {
    #[error(transparent)]
    Sampling(#[from] SampleError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Linearizable,
    NotLinearizable,
    Inconclusive,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Linearizable => "Linearizable",
            Verdict::NotLinearizable => "NotLinearizable",
            Verdict::Inconclusive => "Inconclusive",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Coef {
    A,
    B,
    C,
    D,
}

impl Coef {
    fn name(self) -> &'static str {
        match self {
            Coef::A => "A",
            Coef::B => "B",
            Coef::C => "C",
            Coef::D => "D",
        }
    }

    fn of(self, c: &CubicCode) -> &Expr {
        match self {
            Coef::A => &c.a,
            Coef::B => &c.b,
            Coef::C => &c.c,
            Coef::D => &c.d,
        }
    }

    fn pair(self, rc: &RealCoefficients) -> &(Expr, Expr) {
        match self {
            Coef::A => &rc.a,
            Coef::B => &rc.b,
            Coef::C => &rc.c,
            Coef::D => &rc.d,
        }
    }
}

/// `k * factor * D(coef)`, `D` a word in `z`, `u`.
struct Term {
    k: f64,
    factor: Option<Coef>,
    coef: Coef,
    deriv: &'static str,
}

const fn t(k: f64, factor: Option<Coef>, coef: Coef, deriv: &'static str) -> Term {
    Term {
        k,
        factor,
        coef,
        deriv,
    }
}

use Coef::{A, B, C, D};

const COND_I: [Term; 9] = [
    t(3.0, None, A, "zz"),
    t(3.0, Some(C), A, "z"),
    t(-3.0, Some(D), A, "u"),
    t(3.0, Some(A), C, "z"),
    t(1.0, None, C, "uu"),
    t(-6.0, Some(A), D, "u"),
    t(1.0, Some(B), C, "u"),
    t(-2.0, Some(B), B, "z"),
    t(-2.0, None, B, "zu"),
];

const COND_II: [Term; 9] = [
    t(6.0, Some(D), A, "z"),
    t(-3.0, Some(D), B, "u"),
    t(3.0, Some(A), D, "z"),
    t(1.0, None, B, "zz"),
    t(-2.0, None, C, "zu"),
    t(-3.0, Some(B), D, "u"),
    t(3.0, None, D, "uu"),
    t(2.0, Some(C), C, "u"),
    t(-1.0, Some(C), B, "z"),
];

impl Term {
    fn text(&self) -> String {
        let k = match self.k {
            1.0 => String::new(),
            -1.0 => "-".into(),
            k => format!("{k}*"),
        };
        let f = self
            .factor
            .map(|c| format!("{}*", c.name()))
            .unwrap_or_default();
        format!("{k}{f}{}_{}", self.coef.name(), self.deriv)
    }

    /// Weight the printed real forms put on this term.
    fn printed_weight(&self) -> f64 {
        if self.deriv.len() == 2 {
            4.0
        } else {
            2.0
        }
    }

    fn complex(&self, c: &CubicCode) -> Expr {
        let mut d = self.coef.of(c).clone();
        for s in self.deriv.chars() {
            d = d.diff(&s.to_string());
        }
        let mut fs = vec![Expr::real(self.k), d];
        if let Some(f) = self.factor {
            fs.push(f.of(c).clone());
        }
        Expr::product(fs)
    }

    fn real(&self, rc: &RealCoefficients) -> (Expr, Expr) {
        let mut d = self.coef.pair(rc).clone();
        for s in self.deriv.chars().rev() {
            d = if s == 'z' {
                wirtinger(&d, "x", "y")
            } else {
                wirtinger(&d, "f", "g")
            };
        }
        let (re, im) = match self.factor {
            Some(f) => cmul(f.pair(rc), &d),
            None => d,
        };
        (re.scale(self.k), im.scale(self.k))
    }
}

fn wirtinger(k: &(Expr, Expr), s: &str, t: &str) -> (Expr, Expr) {
    let (k1, k2) = k;
    (
        (&k1.diff(s) + &k2.diff(t)).scale(0.5),
        (&k2.diff(s) - &k1.diff(t)).scale(0.5),
    )
}

fn cmul(a: &(Expr, Expr), b: &(Expr, Expr)) -> (Expr, Expr) {
    (
        &(&a.0 * &b.0) - &(&a.1 * &b.1),
        &(&a.0 * &b.1) + &(&a.1 * &b.0),
    )
}

/// Conditions I and II.
pub fn complex_conditions(c: &CubicCode) -> (Expr, Expr) {
    let sum = |ts: &[Term]| Expr::sum(ts.iter().map(|t| t.complex(c)).collect());
    (sum(&COND_I), sum(&COND_II))
}

/// `(Re I, Im I, Re II, Im II)` from the real coefficient pairs.
pub fn real_conditions(rc: &RealCoefficients) -> [Expr; 4] {
    let parts = |ts: &[Term]| {
        let (re, im): (Vec<_>, Vec<_>) = ts.iter().map(|t| t.real(rc)).unzip();
        (Expr::sum(re), Expr::sum(im))
    };
    let (r1, i1) = parts(&COND_I);
    let (r2, i2) = parts(&COND_II);
    [r1, i1, r2, i2]
}

pub const REAL_CONDITION_NAMES: [&str; 4] = ["Re I", "Im I", "Re II", "Im II"];

/// One line of the complex-term to printed-term correspondence.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TermMapping {
    pub condition: &'static str,
    pub complex_term: String,
    pub printed_re: &'static str,
    pub printed_im: &'static str,
    pub printed_weight: f64,
}

fn printed_table() -> &'static BTreeMap<String, Vec<String>> {
    static TABLE: OnceLock<BTreeMap<String, Vec<String>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        serde_json::from_str(include_str!("../fixtures/printed_conditions.json"))
            .expect("printed condition table is valid JSON")
    })
}

fn printed(condition: &str, k: usize) -> &'static str {
    printed_table()[condition][k].as_str()
}

pub fn term_mappings() -> Vec<TermMapping> {
    let mut out = Vec::new();
    for (cond, terms, re, im) in [
        ("I", &COND_I, "Re I", "Im I"),
        ("II", &COND_II, "Re II", "Im II"),
    ] {
        for (k, t) in terms.iter().enumerate() {
            out.push(TermMapping {
                condition: cond,
                complex_term: t.text(),
                printed_re: printed(re, k),
                printed_im: printed(im, k),
                printed_weight: t.printed_weight(),
            });
        }
    }
    out
}

/// Real-jet symbols `K1`, `K2_x`, `K1_fg`, ... and their values for `rc`.
fn jet_values(rc: &RealCoefficients) -> BTreeMap<String, Expr> {
    const WORDS: [&str; 15] = [
        "", "x", "y", "f", "g", "xx", "yy", "xy", "ff", "gg", "fg", "xf", "xg", "yf", "yg",
    ];
    let mut out = BTreeMap::new();
    for (name, (k1, k2)) in rc.pairs() {
        for (idx, k) in [("1", k1), ("2", k2)] {
            for w in WORDS {
                let mut d = k.clone();
                for s in w.chars() {
                    d = d.diff(&s.to_string());
                }
                let sym = if w.is_empty() {
                    format!("{name}{idx}")
                } else {
                    format!("{name}{idx}_{w}")
                };
                out.insert(sym, d);
            }
        }
    }
    out
}

/// A printed term group evaluated against its exact counterpart.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiteralComparison {
    pub condition: &'static str,
    pub term: usize,
    pub complex_term: String,
    pub printed: &'static str,
    /// `printed / exact` when it is the same at every sample.
    pub ratio: Option<f64>,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub kind: Option<AnnotationKind>,
}

/// Whole printed conditions against the exact ones.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiteralTotals {
    pub condition: &'static str,
    pub exact_max: f64,
    pub printed_max: f64,
    /// Printed terms divided by their printed weight, summed.
    pub reweighted_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiteralTable {
    pub rows: Vec<LiteralComparison>,
    pub totals: Vec<LiteralTotals>,
}

impl LiteralTable {
    pub fn annotations(&self) -> Vec<Annotation> {
        self.rows
            .iter()
            .filter_map(|r| {
                let kind = r.kind?;
                let msg = match (kind, r.ratio) {
                    (AnnotationKind::WeightConvention, Some(w)) => format!(
                        "{} of {} printed with weight {w}",
                        r.condition.split(' ').next().unwrap_or(""),
                        r.complex_term
                    ),
                    (_, Some(w)) => format!(
                        "constant ratio {} to the exact part of {}",
                        num(w),
                        r.complex_term
                    ),
                    _ => format!(
                        "printed/exact ratio varies over [{}, {}]; not a multiple of the exact part of {}",
                        num(r.ratio_min),
                        num(r.ratio_max),
                        r.complex_term
                    ),
                };
                Some(Annotation::new(kind, r.printed, format!("{}: {msg}", r.condition)))
            })
            .collect()
    }
}

const LITERAL_ZERO: f64 = 1e-10;
const RATIO_SPREAD: f64 = 1e-6;

/// Evaluates the printed term groups and the exact ones at shared real
/// samples. Rows where both vanish are omitted.
pub fn compare_printed_literal(
    rc: &RealCoefficients,
    sampler: &mut Sampler,
) -> Result<LiteralTable, LieError> {
    let jets = jet_values(rc);
    let alphabet = Alphabet::new(jets.keys().cloned());
    let mut groups: Vec<(&'static str, usize, String, &'static str, f64, Expr, Expr)> = Vec::new();
    for (terms, names) in [(&COND_I, ["Re I", "Im I"]), (&COND_II, ["Re II", "Im II"])] {
        for (k, t) in terms.iter().enumerate() {
            let (re, im) = t.real(rc);
            for (name, exact) in names.into_iter().zip([re, im]) {
                let text = printed(name, k);
                let lit = parse(text, &alphabet)
                    .expect("printed table parses")
                    .substitute(&jets);
                groups.push((name, k, t.text(), text, t.printed_weight(), exact, lit));
            }
        }
    }
    let all = Expr::sum(
        groups
            .iter()
            .flat_map(|g| [g.5.clone(), g.6.clone()])
            .collect(),
    );
    let symbols: Vec<String> = all.free_vars().into_iter().collect();
    let n = sampler.config().samples;
    let guards = Exclusion::guards_for(&all);
    let samples: Vec<Binding> = if symbols.is_empty() {
        vec![Binding::default()]
    } else {
        sampler.draw_accepted(&symbols, &guards, n, |b| {
            groups
                .iter()
                .all(|g| g.5.eval(b).is_ok() && g.6.eval(b).is_ok())
        })?
    };
    let ev = |e: &Expr, b: &Binding| e.eval(b).map(|v| v.re).unwrap_or(f64::NAN);

    let mut rows = Vec::new();
    for (name, k, cterm, text, _, exact, lit) in &groups {
        let pairs: Vec<(f64, f64)> = samples.iter().map(|b| (ev(exact, b), ev(lit, b))).collect();
        let scale = pairs
            .iter()
            .fold(1.0f64, |m, (e, l)| m.max(e.abs()).max(l.abs()));
        let tiny = LITERAL_ZERO * scale;
        if pairs
            .iter()
            .all(|(e, l)| e.abs() <= tiny && l.abs() <= tiny)
        {
            continue;
        }
        let ratios: Vec<f64> = pairs
            .iter()
            .filter(|(e, _)| e.abs() > tiny)
            .map(|(e, l)| l / e)
            .collect();
        let orphan = pairs.iter().any(|(e, l)| e.abs() <= tiny && l.abs() > tiny);
        let (lo, hi) = ratios
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| {
                (a.min(*r), b.max(*r))
            });
        let constant = !orphan
            && !ratios.is_empty()
            && (hi - lo) <= RATIO_SPREAD * hi.abs().max(lo.abs()).max(1.0);
        let ratio = constant.then(|| (lo + hi) / 2.0);
        let kind = match ratio {
            Some(r) if (r - 1.0).abs() < RATIO_SPREAD => None,
            Some(r) if (r - 2.0).abs() < RATIO_SPREAD || (r - 4.0).abs() < RATIO_SPREAD => {
                Some(AnnotationKind::WeightConvention)
            }
            _ => Some(AnnotationKind::Typo),
        };
        rows.push(LiteralComparison {
            condition: name,
            term: *k,
            complex_term: cterm.clone(),
            printed: text,
            ratio: ratio.map(|r| {
                if kind == Some(AnnotationKind::WeightConvention) {
                    r.round()
                } else {
                    r
                }
            }),
            ratio_min: if ratios.is_empty() { f64::NAN } else { lo },
            ratio_max: if ratios.is_empty() { f64::NAN } else { hi },
            kind,
        });
    }

    let mut totals = Vec::new();
    for name in REAL_CONDITION_NAMES {
        let mine: Vec<_> = groups.iter().filter(|g| g.0 == name).collect();
        let exact = Expr::sum(mine.iter().map(|g| g.5.clone()).collect());
        let lit = Expr::sum(mine.iter().map(|g| g.6.clone()).collect());
        let rew = Expr::sum(mine.iter().map(|g| g.6.clone().scale(1.0 / g.4)).collect());
        let max = |e: &Expr| {
            samples
                .iter()
                .map(|b| ev(e, b).abs())
                .fold(0.0f64, f64::max)
        };
        totals.push(LiteralTotals {
            condition: name,
            exact_max: max(&exact),
            printed_max: max(&lit),
            reweighted_max: max(&rew),
        });
    }
    Ok(LiteralTable { rows, totals })
}

/// Sampled zero test of one condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub name: &'static str,
    #[serde(serialize_with = "crate::report::display")]
    pub expr: Expr,
    pub is_zero: bool,
    pub max_residual: f64,
    pub max_relative: f64,
    /// Fraction of samples with relative residual above `10 * tol`.
    pub fraction_nonzero: f64,
}

impl ConditionCheck {
    fn new(name: &'static str, expr: Expr, test: &ZeroTest, tol: f64) -> Self {
        ConditionCheck {
            name,
            expr,
            is_zero: test.is_zero,
            max_residual: test.max_residual,
            max_relative: test.max_relative,
            fraction_nonzero: test.fraction_above(10.0 * tol),
        }
    }
}

/// Share of samples that must be clearly nonzero before a condition counts
/// as failing.
pub const NONZERO_MAJORITY: f64 = 0.75;

fn verdict_of(checks: &[ConditionCheck]) -> Verdict {
    if checks.iter().all(|c| c.is_zero) {
        Verdict::Linearizable
    } else if checks
        .iter()
        .any(|c| c.fraction_nonzero >= NONZERO_MAJORITY)
    {
        Verdict::NotLinearizable
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LieConditionReport {
    pub order: u8,
    pub cubic: Option<CubicCode>,
    pub complex: Vec<ConditionCheck>,
    pub real: Vec<ConditionCheck>,
    pub complex_verdict: Verdict,
    pub real_verdict: Verdict,
    pub verdict: Verdict,
    pub reason: Option<String>,
    pub literal: Option<LiteralTable>,
    pub annotations: Vec<Annotation>,
}

impl LieConditionReport {
    pub fn cond_i(&self) -> Option<&Expr> {
        self.complex.first().map(|c| &c.expr)
    }

    pub fn cond_ii(&self) -> Option<&Expr> {
        self.complex.get(1).map(|c| &c.expr)
    }

    fn fixed(order: u8, verdict: Verdict, reason: String) -> Self {
        LieConditionReport {
            order,
            cubic: None,
            complex: Vec::new(),
            real: Vec::new(),
            complex_verdict: verdict,
            real_verdict: verdict,
            verdict,
            reason: Some(reason),
            literal: None,
            annotations: Vec::new(),
        }
    }

    /// One JSON record per condition.
    pub fn json_lines(&self) -> Vec<String> {
        let head = |c: &ConditionCheck, side: &str| {
            json!({
                "kind": "lie-condition",
                "side": side,
                "condition": c.name,
                "expr": c.expr.to_string(),
                "is_zero": c.is_zero,
                "max_residual": c.max_residual,
                "max_relative": c.max_relative,
                "fraction_nonzero": c.fraction_nonzero,
                "verdict": self.verdict.label(),
            })
            .to_string()
        };
        let mut out: Vec<String> = self.complex.iter().map(|c| head(c, "complex")).collect();
        out.extend(self.real.iter().map(|c| head(c, "real")));
        if out.is_empty() {
            out.push(self.json_line());
        }
        out
    }
}

impl Report for LieConditionReport {
    fn text(&self) -> String {
        let mut s = format!(
            "lie check (order {}): {}\n",
            self.order,
            self.verdict.label()
        );
        if let Some(r) = &self.reason {
            s += &format!("  reason: {r}\n");
        }
        for c in self.complex.iter().chain(&self.real) {
            s += &format!(
                "  {:<6} {:<6} max residual {} (relative {}, nonzero at {:.0}% of samples)\n",
                c.name,
                if c.is_zero { "zero" } else { "NONZERO" },
                num(c.max_residual),
                num(c.max_relative),
                100.0 * c.fraction_nonzero
            );
        }
        if !self.complex.is_empty() && self.complex_verdict != self.real_verdict {
            s += &format!(
                "  complex verdict {} differs from real verdict {}\n",
                self.complex_verdict.label(),
                self.real_verdict.label()
            );
        }
        if let Some(t) = &self.literal {
            for tot in &t.totals {
                s += &format!(
                    "  printed {:<6} max {} (exact {}, reweighted {})\n",
                    tot.condition,
                    num(tot.printed_max),
                    num(tot.exact_max),
                    num(tot.reweighted_max)
                );
            }
        }
        for a in &self.annotations {
            s += &format!("  {a}\n");
        }
        s
    }

    fn json_value(&self) -> serde_json::Value {
        json!({
            "kind": "lie-report",
            "order": self.order,
            "verdict": self.verdict.label(),
            "complex_verdict": self.complex_verdict.label(),
            "real_verdict": self.real_verdict.label(),
            "reason": self.reason,
            "complex": self.complex,
            "real": self.real,
            "literal": self.literal,
            "annotations": self.annotations,
        })
    }
}

/// Zero tests of Conditions I-II and their four real parts.
pub fn check_linearizable(
    code: &Code,
    sampler: &mut Sampler,
    tol: f64,
) -> Result<LieConditionReport, LieError> {
    let cubic = match code {
        Code::First(_) => {
            return Ok(LieConditionReport::fixed(
                1,
                Verdict::Linearizable,
                "first-order equation: conditions are vacuous".into(),
            ))
        }
        Code::Cubic(c) => c.clone(),
        Code::General(g) => match extract_cubic(g) {
            Ok(c) => c,
            Err(CodeError::NotCubic(why)) => {
                return Ok(LieConditionReport::fixed(
                    2,
                    Verdict::NotLinearizable,
                    format!("not cubic in the first derivative: {why}"),
                ))
            }
            Err(e) => {
                return Ok(LieConditionReport::fixed(
                    2,
                    Verdict::Inconclusive,
                    e.to_string(),
                ))
            }
        },
    };
    check_cubic(&cubic, sampler, tol)
}

pub fn check_cubic(
    cubic: &CubicCode,
    sampler: &mut Sampler,
    tol: f64,
) -> Result<LieConditionReport, LieError> {
    let (c1, c2) = complex_conditions(cubic);
    let rc = real_coefficients(cubic);
    let real = real_conditions(&rc);

    let mut complex_checks = Vec::new();
    for (k, (name, e)) in [("I", c1), ("II", c2)].into_iter().enumerate() {
        let test = equiv_zero(&e, &mut sampler.fork(k as u64), tol)?;
        complex_checks.push(ConditionCheck::new(name, e, &test, tol));
    }
    let mut real_checks = Vec::new();
    for (k, (name, e)) in REAL_CONDITION_NAMES.into_iter().zip(real).enumerate() {
        let test = equiv_zero(&e, &mut sampler.fork(10 + k as u64), tol)?;
        real_checks.push(ConditionCheck::new(name, e, &test, tol));
    }
    let complex_verdict = verdict_of(&complex_checks);
    let real_verdict = verdict_of(&real_checks);
    let verdict = if complex_verdict == real_verdict {
        complex_verdict
    } else {
        Verdict::Inconclusive
    };
    let literal = compare_printed_literal(&rc, &mut sampler.fork(20))?;
    let annotations = literal.annotations();
    Ok(LieConditionReport {
        order: 2,
        cubic: Some(cubic.clone()),
        complex: complex_checks,
        real: real_checks,
        complex_verdict,
        real_verdict,
        verdict,
        reason: None,
        literal: Some(literal),
        annotations,
    })
}

/// `max |Re/Im(condition) - real condition|` relative to `1 + largest subterm`,
/// over samples in `(x, y, f, g)`.
pub fn consistency_residual(cubic: &CubicCode, sampler: &mut Sampler) -> Result<f64, LieError> {
    let (c1, c2) = complex_conditions(cubic);
    let real = real_conditions(&real_coefficients(cubic));
    let (r1, i1) = realify(&c1).expect("conditions are analytic");
    let (r2, i2) = realify(&c2).expect("conditions are analytic");
    let mut worst = 0.0f64;
    for (k, (from_complex, direct)) in [r1, i1, r2, i2].iter().zip(&real).enumerate() {
        let diff = from_complex - direct;
        let test = equiv_zero(&diff, &mut sampler.fork(30 + k as u64), 0.0)?;
        worst = worst.max(test.max_relative);
    }
    Ok(worst)
}
