//! Symbolic expressions over complex and real alphabets.
//!
//! [`Expr`] is an immutable tree kept in a shallow canonical form: nested sums
//! and products are flattened, children are sorted by a total order, and
//! constant subtrees are folded. There is no polynomial normal form; deciding
//! whether an expression vanishes is the job of [`equiv_zero`].

mod alphabet;
mod diff;
mod eval;
mod parse;
mod print;
mod realify;
mod sample;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use alphabet::{Alphabet, SymbolKind, COMPLEX_SYMBOLS, REAL_SYMBOLS};
pub use eval::{Binding, BindingError, EvalError};
pub use parse::{parse, ParseError};
pub use realify::{realify, realify_with, RealifyError, RealifyMap};
pub use sample::{
    equiv_zero, Exclusion, Region, SampleError, SampleResidual, Sampler, SamplerConfig, ZeroTest,
    DEFAULT_EXCLUSION_RADIUS, DEFAULT_SAMPLES, DEFAULT_SEED, DEFAULT_TOL,
};

/// Analytic builtin functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Exp,
    Log,
    Sqrt,
    Atan,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Sinh,
        Func::Cosh,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Atan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Atan => "atan",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }

    /// Whether the function has a branch cut under the principal convention.
    pub fn has_branch_cut(self) -> bool {
        matches!(self, Func::Log | Func::Sqrt | Func::Atan)
    }
}

impl fmt::Display for Func {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Expression tree node.
///
/// Always build through the associated constructors ([`Expr::sum`],
/// [`Expr::product`], ...) or the operator impls; they maintain the canonical
/// form that structural equality relies on. Integer powers are the only
/// power nodes: any other exponent is rewritten as `exp(e*log(b))`.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(Complex64),
    Var(String),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Pow(Box<Expr>, i64),
    Quot(Box<Expr>, Box<Expr>),
    Apply(Func, Box<Expr>),
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::Const(Complex64::new(0.0, 0.0))
    }

    pub fn one() -> Expr {
        Expr::Const(Complex64::new(1.0, 0.0))
    }

    pub fn imag_unit() -> Expr {
        Expr::Const(Complex64::new(0.0, 1.0))
    }

    pub fn real(v: f64) -> Expr {
        Expr::Const(Complex64::new(v, 0.0))
    }

    pub fn constant(c: Complex64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if c.re == 0.0 && c.im == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if c.re == 1.0 && c.im == 0.0)
    }

    pub fn as_const(&self) -> Option<Complex64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn sum(terms: Vec<Expr>) -> Expr {
        let mut flat = Vec::with_capacity(terms.len());
        let mut acc = Complex64::new(0.0, 0.0);
        for t in terms {
            match t {
                Expr::Sum(children) => {
                    for c in children {
                        match c {
                            Expr::Const(k) => acc += k,
                            other => flat.push(other),
                        }
                    }
                }
                Expr::Const(k) => acc += k,
                other => flat.push(other),
            }
        }
        let mut flat = collect_like_terms(flat);
        if acc.re != 0.0 || acc.im != 0.0 {
            flat.push(Expr::Const(acc));
        }
        match flat.len() {
            0 => Expr::zero(),
            1 => flat.pop().unwrap(),
            _ => {
                flat.sort_by(canonical_cmp);
                Expr::Sum(flat)
            }
        }
    }

    pub fn product(factors: Vec<Expr>) -> Expr {
        let mut flat = Vec::with_capacity(factors.len());
        let mut acc = Complex64::new(1.0, 0.0);
        for t in factors {
            match t {
                Expr::Product(children) => {
                    for c in children {
                        match c {
                            Expr::Const(k) => acc *= k,
                            other => flat.push(other),
                        }
                    }
                }
                Expr::Const(k) => acc *= k,
                other => flat.push(other),
            }
        }
        if acc.re == 0.0 && acc.im == 0.0 {
            return Expr::zero();
        }
        if acc.re != 1.0 || acc.im != 0.0 {
            flat.push(Expr::Const(acc));
        }
        match flat.len() {
            0 => Expr::one(),
            1 => flat.pop().unwrap(),
            _ => {
                flat.sort_by(canonical_cmp);
                Expr::Product(flat)
            }
        }
    }

    /// Integer power.
    pub fn powi(base: Expr, n: i64) -> Expr {
        if n == 0 {
            return Expr::one();
        }
        if n == 1 {
            return base;
        }
        match base {
            Expr::Const(c) => {
                if c.re == 0.0 && c.im == 0.0 && n < 0 {
                    return Expr::Pow(Box::new(Expr::Const(c)), n);
                }
                let v = match i32::try_from(n) {
                    Ok(k) => c.powi(k),
                    Err(_) => c.powf(n as f64),
                };
                if v.re.is_finite() && v.im.is_finite() {
                    Expr::Const(v)
                } else {
                    Expr::Pow(Box::new(Expr::Const(c)), n)
                }
            }
            Expr::Pow(b, m) => Expr::powi(*b, m * n),
            other => Expr::Pow(Box::new(other), n),
        }
    }

    /// General power; non-integer or symbolic exponents become `exp(e*log(b))`.
    pub fn pow(base: Expr, exponent: Expr) -> Expr {
        if let Expr::Const(c) = &exponent {
            if c.im == 0.0 && c.re.fract() == 0.0 && c.re.abs() < 1e15 {
                return Expr::powi(base, c.re as i64);
            }
        }
        Expr::apply(
            Func::Exp,
            Expr::product(vec![exponent, Expr::apply(Func::Log, base)]),
        )
    }

    pub fn quot(num: Expr, den: Expr) -> Expr {
        if den.is_one() {
            return num;
        }
        if num.is_zero() && !den.is_zero() {
            return Expr::zero();
        }
        if let (Expr::Const(a), Expr::Const(b)) = (&num, &den) {
            if b.re != 0.0 || b.im != 0.0 {
                let v = a / b;
                if v.re.is_finite() && v.im.is_finite() {
                    return Expr::Const(v);
                }
            }
        }
        Expr::Quot(Box::new(num), Box::new(den))
    }

    pub fn apply(func: Func, arg: Expr) -> Expr {
        if let Expr::Const(c) = &arg {
            let v = eval::apply_func(func, *c);
            if let Ok(v) = v {
                if v.re.is_finite() && v.im.is_finite() {
                    return Expr::Const(v);
                }
            }
        }
        Expr::Apply(func, Box::new(arg))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(self) -> Expr {
        Expr::product(vec![Expr::real(-1.0), self])
    }

    pub fn scale(self, k: f64) -> Expr {
        Expr::product(vec![Expr::real(k), self])
    }

    /// Free variables, sorted.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(s) => {
                out.insert(s.clone());
            }
            Expr::Sum(cs) | Expr::Product(cs) => cs.iter().for_each(|c| c.collect_vars(out)),
            Expr::Pow(b, _) => b.collect_vars(out),
            Expr::Quot(n, d) => {
                n.collect_vars(out);
                d.collect_vars(out);
            }
            Expr::Apply(_, a) => a.collect_vars(out),
        }
    }

    pub fn contains_var(&self, name: &str) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(s) => s == name,
            Expr::Sum(cs) | Expr::Product(cs) => cs.iter().any(|c| c.contains_var(name)),
            Expr::Pow(b, _) => b.contains_var(name),
            Expr::Quot(n, d) => n.contains_var(name) || d.contains_var(name),
            Expr::Apply(_, a) => a.contains_var(name),
        }
    }

    /// Simultaneous substitution of variables; the result is re-canonicalized.
    pub fn substitute(&self, map: &BTreeMap<String, Expr>) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var(s) => map.get(s).cloned().unwrap_or_else(|| self.clone()),
            Expr::Sum(cs) => Expr::sum(cs.iter().map(|c| c.substitute(map)).collect()),
            Expr::Product(cs) => Expr::product(cs.iter().map(|c| c.substitute(map)).collect()),
            Expr::Pow(b, n) => Expr::powi(b.substitute(map), *n),
            Expr::Quot(n, d) => Expr::quot(n.substitute(map), d.substitute(map)),
            Expr::Apply(f, a) => Expr::apply(*f, a.substitute(map)),
        }
    }

    pub fn subs(&self, pairs: &[(&str, &Expr)]) -> Expr {
        let map = pairs
            .iter()
            .map(|(k, v)| (k.to_string(), (*v).clone()))
            .collect();
        self.substitute(&map)
    }

    /// Renames variables.
    pub fn rename(&self, pairs: &[(&str, &str)]) -> Expr {
        let map = pairs
            .iter()
            .map(|(k, v)| (k.to_string(), Expr::var(*v)))
            .collect();
        self.substitute(&map)
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Sum(cs) | Expr::Product(cs) => 1 + cs.iter().map(Expr::size).sum::<usize>(),
            Expr::Pow(b, _) => 1 + b.size(),
            Expr::Quot(n, d) => 1 + n.size() + d.size(),
            Expr::Apply(_, a) => 1 + a.size(),
        }
    }

    /// Visits every node, parents before children.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Expr)) {
        visit(self);
        match self {
            Expr::Const(_) | Expr::Var(_) => {}
            Expr::Sum(cs) | Expr::Product(cs) => cs.iter().for_each(|c| c.walk(visit)),
            Expr::Pow(b, _) => b.walk(visit),
            Expr::Quot(n, d) => {
                n.walk(visit);
                d.walk(visit);
            }
            Expr::Apply(_, a) => a.walk(visit),
        }
    }

    /// Re-applies the canonical constructors bottom-up.
    pub fn canonical(&self) -> Expr {
        self.substitute(&BTreeMap::new())
    }

    /// Symbolic partial derivative.
    pub fn diff(&self, symbol: &str) -> Expr {
        diff::diff(self, symbol)
    }
}

/// Splits `k * rest` into its numeric coefficient and the rest.
fn split_coefficient(e: Expr) -> (Complex64, Expr) {
    match e {
        Expr::Product(mut cs) if matches!(cs.first(), Some(Expr::Const(_))) => {
            let Expr::Const(k) = cs.remove(0) else {
                unreachable!()
            };
            let rest = if cs.len() == 1 {
                cs.pop().unwrap()
            } else {
                Expr::Product(cs)
            };
            (k, rest)
        }
        other => (Complex64::new(1.0, 0.0), other),
    }
}

/// Merges terms that differ only in their numeric coefficient.
fn collect_like_terms(terms: Vec<Expr>) -> Vec<Expr> {
    if terms.len() < 2 {
        return terms;
    }
    let mut split: Vec<(Complex64, Expr)> = terms.into_iter().map(split_coefficient).collect();
    split.sort_by(|a, b| canonical_cmp(&a.1, &b.1));
    let mut out: Vec<(Complex64, Expr)> = Vec::with_capacity(split.len());
    for (k, rest) in split {
        match out.last_mut() {
            Some((acc, prev)) if *prev == rest => *acc += k,
            _ => out.push((k, rest)),
        }
    }
    out.into_iter()
        .filter(|(k, _)| k.re != 0.0 || k.im != 0.0)
        .map(|(k, rest)| Expr::product(vec![Expr::Const(k), rest]))
        .collect()
}

fn rank(e: &Expr) -> u8 {
    match e {
        Expr::Const(_) => 0,
        Expr::Var(_) => 1,
        Expr::Pow(..) => 2,
        Expr::Product(_) => 3,
        Expr::Quot(..) => 4,
        Expr::Apply(..) => 5,
        Expr::Sum(_) => 6,
    }
}

/// Total order used to sort children of sums and products.
pub fn canonical_cmp(a: &Expr, b: &Expr) -> Ordering {
    rank(a).cmp(&rank(b)).then_with(|| match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)),
        (Expr::Var(x), Expr::Var(y)) => x.cmp(y),
        (Expr::Pow(b1, n1), Expr::Pow(b2, n2)) => canonical_cmp(b1, b2).then(n1.cmp(n2)),
        (Expr::Sum(x), Expr::Sum(y)) | (Expr::Product(x), Expr::Product(y)) => {
            for (p, q) in x.iter().zip(y) {
                let o = canonical_cmp(p, q);
                if o != Ordering::Equal {
                    return o;
                }
            }
            x.len().cmp(&y.len())
        }
        (Expr::Quot(n1, d1), Expr::Quot(n2, d2)) => {
            canonical_cmp(n1, n2).then_with(|| canonical_cmp(d1, d2))
        }
        (Expr::Apply(f1, a1), Expr::Apply(f2, a2)) => {
            f1.cmp(f2).then_with(|| canonical_cmp(a1, a2))
        }
        _ => Ordering::Equal,
    })
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::sum(vec![self, rhs])
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sum(vec![self, rhs.neg()])
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::product(vec![self, rhs])
    }
}

impl Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::quot(self, rhs)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl Add<&Expr> for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        Expr::sum(vec![self.clone(), rhs.clone()])
    }
}

impl Sub<&Expr> for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        Expr::sum(vec![self.clone(), rhs.clone().neg()])
    }
}

impl Mul<&Expr> for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        Expr::product(vec![self.clone(), rhs.clone()])
    }
}

impl Div<&Expr> for &Expr {
    type Output = Expr;
    fn div(self, rhs: &Expr) -> Expr {
        Expr::quot(self.clone(), rhs.clone())
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Expr {
        Expr::real(v)
    }
}
