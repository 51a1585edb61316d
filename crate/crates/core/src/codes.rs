//! Complex ODEs and their decomposition into real PDE systems.
//!
//! A second-order complex ODE `u'' = w(z, u, u')` with `z = x + iy`,
//! `u = f + ig`, `u' = h + il` becomes two real equations whose right-hand
//! sides are the real and imaginary parts of `w`. The left-hand operators are
//! usually printed as `f_xx - f_yy + 2 g_xy` and `g_xx - g_yy - 2 f_xy`; on
//! Cauchy-Riemann solutions these equal `4 Re u''` and `4 Im u''`, so a
//! [`RealPdeSystem`] carries the weight (1/4, or 1/2 for first order) that
//! makes "weight * printed operator = right-hand side" exact.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse, realify, Alphabet, Expr, ParseError, Sampler, DEFAULT_TOL};
use crate::report::{Annotation, AnnotationKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodeError {
    #[error("right-hand side is not a polynomial of degree <= 3 in up: {0}")]
    NotCubic(String),
    #[error("{what} uses variables outside {{{allowed}}}: {found}")]
    InvalidVariables {
        what: String,
        allowed: String,
        found: String,
    },
    #[error("parse error in `{field}`: {source}")]
    Parse {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("invalid code file: {0}")]
    Format(String),
}

fn check_vars(what: &str, e: &Expr, allowed: &[&str], params: &[String]) -> Result<(), CodeError> {
    let bad: Vec<String> = e
        .free_vars()
        .into_iter()
        .filter(|v| !allowed.contains(&v.as_str()) && !params.contains(v))
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CodeError::InvalidVariables {
            what: what.to_string(),
            allowed: allowed.join(", "),
            found: bad.join(", "),
        })
    }
}

/// `u' = w(z, u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstOrderCode {
    pub w: Expr,
}

impl FirstOrderCode {
    pub fn new(w: Expr) -> Result<Self, CodeError> {
        Self::with_params(w, &[])
    }

    pub fn with_params(w: Expr, params: &[String]) -> Result<Self, CodeError> {
        check_vars("first-order right-hand side", &w, &["z", "u"], params)?;
        Ok(FirstOrderCode { w })
    }
}

/// `u'' = w(z, u, up)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralSecondOrderCode {
    pub w: Expr,
}

impl GeneralSecondOrderCode {
    pub fn new(w: Expr) -> Result<Self, CodeError> {
        Self::with_params(w, &[])
    }

    pub fn with_params(w: Expr, params: &[String]) -> Result<Self, CodeError> {
        check_vars(
            "second-order right-hand side",
            &w,
            &["z", "u", "up"],
            params,
        )?;
        Ok(GeneralSecondOrderCode { w })
    }
}

/// `u'' = A up^3 + B up^2 + C up + D` with coefficients in `(z, u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CubicCode {
    pub a: Expr,
    pub b: Expr,
    pub c: Expr,
    pub d: Expr,
}

impl CubicCode {
    pub fn new(a: Expr, b: Expr, c: Expr, d: Expr) -> Result<Self, CodeError> {
        Self::with_params([a, b, c, d], &[])
    }

    pub fn with_params(coeffs: [Expr; 4], params: &[String]) -> Result<Self, CodeError> {
        for (name, e) in ["A", "B", "C", "D"].iter().zip(&coeffs) {
            check_vars(&format!("coefficient {name}"), e, &["z", "u"], params)?;
        }
        let [a, b, c, d] = coeffs;
        Ok(CubicCode { a, b, c, d })
    }

    pub fn zero() -> Self {
        CubicCode {
            a: Expr::zero(),
            b: Expr::zero(),
            c: Expr::zero(),
            d: Expr::zero(),
        }
    }

    pub fn coefficients(&self) -> [&Expr; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    /// `A up^3 + B up^2 + C up + D`.
    pub fn rhs(&self) -> Expr {
        let up = Expr::var("up");
        Expr::sum(vec![
            &self.a * &Expr::powi(up.clone(), 3),
            &self.b * &Expr::powi(up.clone(), 2),
            &self.c * &up,
            self.d.clone(),
        ])
    }

    pub fn as_general(&self) -> GeneralSecondOrderCode {
        GeneralSecondOrderCode { w: self.rhs() }
    }
}

/// Any supported complex ODE.
#[derive(Clone, Debug, PartialEq)]
pub enum Code {
    First(FirstOrderCode),
    General(GeneralSecondOrderCode),
    Cubic(CubicCode),
}

impl Code {
    pub fn order(&self) -> u8 {
        match self {
            Code::First(_) => 1,
            _ => 2,
        }
    }

    /// Right-hand side `w`.
    pub fn rhs(&self) -> Expr {
        match self {
            Code::First(c) => c.w.clone(),
            Code::General(c) => c.w.clone(),
            Code::Cubic(c) => c.rhs(),
        }
    }

    pub fn to_cubic(&self) -> Result<CubicCode, CodeError> {
        match self {
            Code::First(_) => Err(CodeError::NotCubic("first-order equation".into())),
            Code::General(g) => extract_cubic(g),
            Code::Cubic(c) => Ok(c.clone()),
        }
    }

    /// Residual `u^(n) - w` along a curve `u(z)`, as an expression in `z`
    /// and the curve's parameters.
    pub fn residual_along(&self, u: &Expr) -> Expr {
        let up = u.diff("z");
        match self {
            Code::First(c) => &up - &c.w.subs(&[("u", u)]),
            _ => {
                let upp = up.diff("z");
                &upp - &self.rhs().subs(&[("u", u), ("up", &up)])
            }
        }
    }
}

/// Polynomial coefficients of `e` in `var`, lowest degree first.
fn poly_coeffs(e: &Expr, var: &str) -> Option<Vec<Expr>> {
    if !e.contains_var(var) {
        return Some(vec![e.clone()]);
    }
    match e {
        Expr::Var(v) if v == var => Some(vec![Expr::zero(), Expr::one()]),
        Expr::Sum(cs) => {
            let mut acc: Vec<Vec<Expr>> = Vec::new();
            for c in cs {
                let p = poly_coeffs(c, var)?;
                for (k, t) in p.into_iter().enumerate() {
                    if acc.len() <= k {
                        acc.resize(k + 1, Vec::new());
                    }
                    acc[k].push(t);
                }
            }
            Some(acc.into_iter().map(Expr::sum).collect())
        }
        Expr::Product(cs) => {
            let mut acc = vec![Expr::one()];
            for c in cs {
                acc = convolve(&acc, &poly_coeffs(c, var)?);
            }
            Some(acc)
        }
        Expr::Pow(b, n) if *n > 0 => {
            let base = poly_coeffs(b, var)?;
            let mut acc = vec![Expr::one()];
            for _ in 0..*n {
                acc = convolve(&acc, &base);
            }
            Some(acc)
        }
        Expr::Quot(n, d) if !d.contains_var(var) => Some(
            poly_coeffs(n, var)?
                .into_iter()
                .map(|c| Expr::quot(c, (**d).clone()))
                .collect(),
        ),
        _ => None,
    }
}

fn convolve(p: &[Expr], q: &[Expr]) -> Vec<Expr> {
    let mut out: Vec<Vec<Expr>> = vec![Vec::new(); p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            if a.is_zero() || b.is_zero() {
                continue;
            }
            out[i + j].push(a * b);
        }
    }
    out.into_iter().map(Expr::sum).collect()
}

/// Reads off `A, B, C, D` when `w` is syntactically cubic in `up`.
pub fn extract_cubic(g: &GeneralSecondOrderCode) -> Result<CubicCode, CodeError> {
    let mut coeffs = poly_coeffs(&g.w, "up").ok_or_else(|| {
        CodeError::NotCubic(format!("non-polynomial dependence on up in {}", g.w))
    })?;
    while coeffs.len() > 1 && coeffs.last().is_some_and(Expr::is_zero) {
        coeffs.pop();
    }
    if coeffs.len() > 4 {
        return Err(CodeError::NotCubic(format!(
            "degree {} in up in {}",
            coeffs.len() - 1,
            g.w
        )));
    }
    coeffs.resize(4, Expr::zero());
    let cubic = CubicCode {
        d: coeffs[0].clone(),
        c: coeffs[1].clone(),
        b: coeffs[2].clone(),
        a: coeffs[3].clone(),
    };
    let mut s = Sampler::with_seed(0x000c_0de5);
    let check = crate::expr::equiv_zero(&(&cubic.rhs() - &g.w), &mut s, DEFAULT_TOL);
    match check {
        Ok(t) if t.is_zero => Ok(cubic),
        Ok(t) => Err(CodeError::NotCubic(format!(
            "reconstruction mismatch (residual {:e})",
            t.max_residual
        ))),
        Err(e) => Err(CodeError::NotCubic(format!(
            "reconstruction check failed: {e}"
        ))),
    }
}

/// Real PDE system of a complex ODE: `weight * L1 = rhs_re`, `weight * L2 = rhs_im`
/// with `L1, L2` the printed left-hand operators.
#[derive(Clone, Debug, PartialEq)]
pub struct RealPdeSystem {
    pub order: u8,
    pub rhs_re: Expr,
    pub rhs_im: Expr,
    pub convention_weight: f64,
    pub annotations: Vec<Annotation>,
}

impl RealPdeSystem {
    pub fn new(order: u8, rhs_re: Expr, rhs_im: Expr) -> Self {
        RealPdeSystem {
            order,
            rhs_re,
            rhs_im,
            convention_weight: weight_for(order),
            annotations: vec![weight_annotation(order)],
        }
    }

    /// Printed left-hand operators.
    pub fn operator_text(&self) -> (&'static str, &'static str) {
        if self.order == 1 {
            ("f_x + g_y", "g_x - f_y")
        } else {
            ("f_xx - f_yy + 2*g_xy", "g_xx - g_yy - 2*f_xy")
        }
    }

    /// Real-side variables the right-hand sides may use.
    pub fn variables(&self) -> &'static [&'static str] {
        if self.order == 1 {
            &["x", "y", "f", "g"]
        } else {
            &["x", "y", "f", "g", "h", "l"]
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut v = self.rhs_re.free_vars();
        v.extend(self.rhs_im.free_vars());
        v
    }
}

fn weight_for(order: u8) -> f64 {
    if order == 1 {
        0.5
    } else {
        0.25
    }
}

fn weight_annotation(order: u8) -> Annotation {
    let (printed, w, meaning) = if order == 1 {
        ("f_x + g_y = w1, g_x - f_y = w2", "1/2", "Re u', Im u'")
    } else {
        (
            "f_xx - f_yy + 2g_xy = w1, g_xx - g_yy - 2f_xy = w2",
            "1/4",
            "Re u'', Im u''",
        )
    };
    Annotation::new(
        AnnotationKind::WeightConvention,
        printed,
        format!("printed operators carry weight {w}: on Cauchy-Riemann solutions weight * operator = {meaning}"),
    )
}

/// `u' = w` realified.
pub fn decompose_first(c: &FirstOrderCode) -> RealPdeSystem {
    let (re, im) = realify(&c.w).expect("code expressions are analytic");
    RealPdeSystem::new(1, re, im)
}

/// Cubic `u''` equation realified, with `up -> h + il`.
pub fn decompose_second(c: &CubicCode) -> RealPdeSystem {
    let (re, im) = realify(&c.rhs()).expect("code expressions are analytic");
    let mut sys = RealPdeSystem::new(2, re, im);
    sys.annotations.push(Annotation::new(
        AnnotationKind::Typo,
        "... + C^1 h - C^2 L + D^1, ... + C^2 h + C^1 L + D^2",
        "capital L in the C-terms of the general cubic system read as l = Im u'",
    ));
    sys
}

pub fn decompose_general(c: &GeneralSecondOrderCode) -> RealPdeSystem {
    let (re, im) = realify(&c.w).expect("code expressions are analytic");
    RealPdeSystem::new(2, re, im)
}

pub fn decompose(c: &Code) -> RealPdeSystem {
    match c {
        Code::First(f) => decompose_first(f),
        Code::Cubic(k) => decompose_second(k),
        Code::General(g) => match extract_cubic(g) {
            Ok(k) => decompose_second(&k),
            Err(_) => decompose_general(g),
        },
    }
}

/// Real and imaginary parts of the four cubic coefficients, in `(x, y, f, g)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RealCoefficients {
    pub a: (Expr, Expr),
    pub b: (Expr, Expr),
    pub c: (Expr, Expr),
    pub d: (Expr, Expr),
}

impl RealCoefficients {
    pub fn pairs(&self) -> [(&'static str, &(Expr, Expr)); 4] {
        [
            ("A", &self.a),
            ("B", &self.b),
            ("C", &self.c),
            ("D", &self.d),
        ]
    }

    /// Cauchy-Riemann residuals of every pair, in `(x, y)` and in `(f, g)`.
    /// Each vanishes identically for realified analytic coefficients.
    pub fn cr_residuals(&self) -> Vec<(String, Expr)> {
        let mut out = Vec::new();
        for (name, (k1, k2)) in self.pairs() {
            for (s, t) in [("x", "y"), ("f", "g")] {
                out.push((
                    format!("{name}1_{s} - {name}2_{t}"),
                    &k1.diff(s) - &k2.diff(t),
                ));
                out.push((
                    format!("{name}1_{t} + {name}2_{s}"),
                    &k1.diff(t) + &k2.diff(s),
                ));
            }
        }
        out
    }

    /// Right-hand sides of the general cubic system written with real
    /// coefficients: `A1(h^3 - 3hl^2) - A2(3h^2 l - l^3) + B1(h^2 - l^2) - 2B2 hl + C1 h - C2 l + D1`
    /// and its imaginary companion.
    pub fn template_rhs(&self) -> (Expr, Expr) {
        let h = Expr::var("h");
        let l = Expr::var("l");
        let p3 = &Expr::powi(h.clone(), 3) - &(Expr::powi(l.clone(), 2) * h.clone()).scale(3.0);
        let q3 = &(Expr::powi(h.clone(), 2) * l.clone()).scale(3.0) - &Expr::powi(l.clone(), 3);
        let p2 = &Expr::powi(h.clone(), 2) - &Expr::powi(l.clone(), 2);
        let q2 = (&h * &l).scale(2.0);
        let (a1, a2) = &self.a;
        let (b1, b2) = &self.b;
        let (c1, c2) = &self.c;
        let (d1, d2) = &self.d;
        let re = Expr::sum(vec![
            a1 * &p3,
            (a2 * &q3).neg(),
            b1 * &p2,
            (b2 * &q2).neg(),
            c1 * &h,
            (c2 * &l).neg(),
            d1.clone(),
        ]);
        let im = Expr::sum(vec![
            a1 * &q3,
            a2 * &p3,
            b1 * &q2,
            b2 * &p2,
            c2 * &h,
            c1 * &l,
            d2.clone(),
        ]);
        (re, im)
    }
}

pub fn real_coefficients(c: &CubicCode) -> RealCoefficients {
    let r = |e: &Expr| realify(e).expect("code expressions are analytic");
    RealCoefficients {
        a: r(&c.a),
        b: r(&c.b),
        c: r(&c.c),
        d: r(&c.d),
    }
}

/// On-disk form of a code definition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeFile {
    pub order: u8,
    pub form: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<String>,
    #[serde(default, rename = "A", skip_serializing_if = "Option::is_none")]
    pub a: Option<String>,
    #[serde(default, rename = "B", skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
    #[serde(default, rename = "C", skip_serializing_if = "Option::is_none")]
    pub c: Option<String>,
    #[serde(default, rename = "D", skip_serializing_if = "Option::is_none")]
    pub d: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parameters: Vec<String>,
}

impl CodeFile {
    pub fn compile(&self) -> Result<Code, CodeError> {
        let alphabet = Alphabet::complex(&self.parameters);
        let field = |name: &str, v: &Option<String>| -> Result<Expr, CodeError> {
            match v {
                Some(t) => parse(t, &alphabet).map_err(|source| CodeError::Parse {
                    field: name.to_string(),
                    source,
                }),
                None => Ok(Expr::zero()),
            }
        };
        match (self.order, self.form.as_str()) {
            (1, "first") => {
                let w = self
                    .w
                    .as_ref()
                    .ok_or_else(|| CodeError::Format("first-order code needs `w`".into()))?;
                Ok(Code::First(FirstOrderCode::with_params(
                    field("w", &Some(w.clone()))?,
                    &self.parameters,
                )?))
            }
            (2, "general") => {
                let w = self
                    .w
                    .as_ref()
                    .ok_or_else(|| CodeError::Format("general code needs `w`".into()))?;
                Ok(Code::General(GeneralSecondOrderCode::with_params(
                    field("w", &Some(w.clone()))?,
                    &self.parameters,
                )?))
            }
            (2, "cubic") => Ok(Code::Cubic(CubicCode::with_params(
                [
                    field("A", &self.a)?,
                    field("B", &self.b)?,
                    field("C", &self.c)?,
                    field("D", &self.d)?,
                ],
                &self.parameters,
            )?)),
            (o, f) => Err(CodeError::Format(format!(
                "unsupported order/form combination: {o}/{f}"
            ))),
        }
    }

    pub fn from_code(code: &Code, parameters: &[String]) -> CodeFile {
        let mut file = CodeFile {
            order: code.order(),
            form: String::new(),
            w: None,
            a: None,
            b: None,
            c: None,
            d: None,
            parameters: parameters.to_vec(),
        };
        match code {
            Code::First(c) => {
                file.form = "first".into();
                file.w = Some(c.w.to_string());
            }
            Code::General(c) => {
                file.form = "general".into();
                file.w = Some(c.w.to_string());
            }
            Code::Cubic(c) => {
                file.form = "cubic".into();
                file.a = Some(c.a.to_string());
                file.b = Some(c.b.to_string());
                file.c = Some(c.c.to_string());
                file.d = Some(c.d.to_string());
            }
        }
        file
    }
}

/// Parses a JSON code definition.
pub fn load_code(json: &str) -> Result<Code, CodeError> {
    let file: CodeFile =
        serde_json::from_str(json).map_err(|e| CodeError::Format(e.to_string()))?;
    file.compile()
}
