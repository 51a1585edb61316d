//! Separation of complex expressions into real and imaginary parts.
//!
//! Each complex symbol is replaced by `re + i*im` over real symbols and the
//! tree is split by structural recursion. Builtins use the standard analytic
//! identities; `log`, `sqrt` and `atan` use principal-branch formulas that
//! are exact away from their cuts.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{Expr, Func};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RealifyError {
    #[error("node has no analytic realification: {0}")]
    NonAnalyticNode(String),
}

/// Complex symbol -> (real-part symbol, imaginary-part symbol). Symbols not
/// in the map are treated as real parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct RealifyMap {
    pairs: BTreeMap<String, (String, String)>,
}

impl Default for RealifyMap {
    fn default() -> Self {
        let mut pairs = BTreeMap::new();
        for (c, r, i) in [
            ("z", "x", "y"),
            ("u", "f", "g"),
            ("up", "h", "l"),
            ("Z", "X", "Y"),
            ("U", "F", "G"),
            ("Up", "H", "L"),
        ] {
            pairs.insert(c.to_string(), (r.to_string(), i.to_string()));
        }
        RealifyMap { pairs }
    }
}

impl RealifyMap {
    pub fn empty() -> Self {
        RealifyMap {
            pairs: BTreeMap::new(),
        }
    }

    pub fn with(mut self, complex: &str, re: &str, im: &str) -> Self {
        self.pairs
            .insert(complex.to_string(), (re.to_string(), im.to_string()));
        self
    }

    pub fn get(&self, complex: &str) -> Option<(&str, &str)> {
        self.pairs
            .get(complex)
            .map(|(a, b)| (a.as_str(), b.as_str()))
    }
}

type Pair = (Expr, Expr);

fn mul(a: &Pair, b: &Pair) -> Pair {
    (
        &(&a.0 * &b.0) - &(&a.1 * &b.1),
        &(&a.0 * &b.1) + &(&a.1 * &b.0),
    )
}

fn div(a: &Pair, b: &Pair) -> Pair {
    if b.1.is_zero() {
        return (&a.0 / &b.0, &a.1 / &b.0);
    }
    let den = Expr::powi(b.0.clone(), 2) + Expr::powi(b.1.clone(), 2);
    (
        Expr::quot(&(&a.0 * &b.0) + &(&a.1 * &b.1), den.clone()),
        Expr::quot(&(&a.1 * &b.0) - &(&a.0 * &b.1), den),
    )
}

fn binomial(n: i64, k: i64) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

fn pow(p: &Pair, n: i64) -> Pair {
    if n < 0 {
        let positive = pow(p, -n);
        return div(&(Expr::one(), Expr::zero()), &positive);
    }
    if p.1.is_zero() {
        return (Expr::powi(p.0.clone(), n), Expr::zero());
    }
    if p.0.is_zero() {
        // (iq)^n = i^n q^n
        let qn = Expr::powi(p.1.clone(), n);
        return match n.rem_euclid(4) {
            0 => (qn, Expr::zero()),
            1 => (Expr::zero(), qn),
            2 => (qn.neg(), Expr::zero()),
            _ => (Expr::zero(), qn.neg()),
        };
    }
    let mut re = Vec::new();
    let mut im = Vec::new();
    for k in 0..=n {
        let c = binomial(n, k);
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let term = Expr::product(vec![
            Expr::real(c * sign),
            Expr::powi(p.0.clone(), n - k),
            Expr::powi(p.1.clone(), k),
        ]);
        if k % 2 == 0 {
            re.push(term);
        } else {
            im.push(term);
        }
    }
    (Expr::sum(re), Expr::sum(im))
}

fn modulus(p: &Pair) -> Expr {
    Expr::apply(
        Func::Sqrt,
        Expr::powi(p.0.clone(), 2) + Expr::powi(p.1.clone(), 2),
    )
}

/// Principal argument, `2*atan(q/(|w| + p))`.
fn arg(p: &Pair) -> Expr {
    if p.1.is_zero() {
        // Real argument: principal value is 0 on the positive axis; the
        // negative axis is the excluded cut.
        return Expr::zero();
    }
    Expr::apply(
        Func::Atan,
        Expr::quot(p.1.clone(), modulus(p) + p.0.clone()),
    )
    .scale(2.0)
}

fn log(p: &Pair) -> Pair {
    let sq = Expr::powi(p.0.clone(), 2) + Expr::powi(p.1.clone(), 2);
    (Expr::apply(Func::Log, sq).scale(0.5), arg(p))
}

fn apply(f: Func, p: &Pair) -> Pair {
    let (a, b) = (p.0.clone(), p.1.clone());
    let real_arg = b.is_zero();
    match f {
        Func::Sin if real_arg => (Expr::apply(Func::Sin, a), Expr::zero()),
        Func::Cos if real_arg => (Expr::apply(Func::Cos, a), Expr::zero()),
        Func::Tan if real_arg => (Expr::apply(Func::Tan, a), Expr::zero()),
        Func::Sinh if real_arg => (Expr::apply(Func::Sinh, a), Expr::zero()),
        Func::Cosh if real_arg => (Expr::apply(Func::Cosh, a), Expr::zero()),
        Func::Exp if real_arg => (Expr::apply(Func::Exp, a), Expr::zero()),
        Func::Atan if real_arg => (Expr::apply(Func::Atan, a), Expr::zero()),
        Func::Sin => (
            Expr::apply(Func::Sin, a.clone()) * Expr::apply(Func::Cosh, b.clone()),
            Expr::apply(Func::Cos, a) * Expr::apply(Func::Sinh, b),
        ),
        Func::Cos => (
            Expr::apply(Func::Cos, a.clone()) * Expr::apply(Func::Cosh, b.clone()),
            (Expr::apply(Func::Sin, a) * Expr::apply(Func::Sinh, b)).neg(),
        ),
        Func::Tan => {
            let den = Expr::powi(Expr::apply(Func::Cos, a.clone()), 2)
                + Expr::powi(Expr::apply(Func::Sinh, b.clone()), 2);
            (
                Expr::quot(Expr::apply(Func::Sin, a.scale(2.0)).scale(0.5), den.clone()),
                Expr::quot(Expr::apply(Func::Sinh, b.scale(2.0)).scale(0.5), den),
            )
        }
        Func::Sinh => (
            Expr::apply(Func::Sinh, a.clone()) * Expr::apply(Func::Cos, b.clone()),
            Expr::apply(Func::Cosh, a) * Expr::apply(Func::Sin, b),
        ),
        Func::Cosh => (
            Expr::apply(Func::Cosh, a.clone()) * Expr::apply(Func::Cos, b.clone()),
            Expr::apply(Func::Sinh, a) * Expr::apply(Func::Sin, b),
        ),
        Func::Exp => {
            let m = Expr::apply(Func::Exp, a);
            (
                &m * &Expr::apply(Func::Cos, b.clone()),
                m * Expr::apply(Func::Sin, b),
            )
        }
        Func::Log => log(p),
        Func::Sqrt => {
            // sqrt(w) = sqrt((|w|+p)/2) + i q/sqrt(2(|w|+p))
            let s = modulus(p) + a;
            (
                Expr::apply(Func::Sqrt, s.clone().scale(0.5)),
                Expr::quot(b, Expr::apply(Func::Sqrt, s.scale(2.0))),
            )
        }
        Func::Atan => {
            // atan(w) = (i/2) [log(1 - i w) - log(1 + i w)]
            let one = Expr::one();
            let l1 = log(&(&one + &b, a.clone().neg()));
            let l2 = log(&(&one - &b, a));
            ((&l2.1 - &l1.1).scale(0.5), (&l1.0 - &l2.0).scale(0.5))
        }
    }
}

fn split(e: &Expr, map: &RealifyMap) -> Result<Pair, RealifyError> {
    Ok(match e {
        Expr::Const(c) => (Expr::real(c.re), Expr::real(c.im)),
        Expr::Var(s) => match map.get(s) {
            Some((re, im)) => (Expr::var(re), Expr::var(im)),
            None => (e.clone(), Expr::zero()),
        },
        Expr::Sum(cs) => {
            let parts = cs
                .iter()
                .map(|c| split(c, map))
                .collect::<Result<Vec<_>, _>>()?;
            let (re, im): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
            (Expr::sum(re), Expr::sum(im))
        }
        Expr::Product(cs) => {
            let mut acc = (Expr::one(), Expr::zero());
            for c in cs {
                acc = mul(&acc, &split(c, map)?);
            }
            acc
        }
        Expr::Pow(b, n) => pow(&split(b, map)?, *n),
        Expr::Quot(n, d) => div(&split(n, map)?, &split(d, map)?),
        Expr::Apply(f, a) => apply(*f, &split(a, map)?),
    })
}

/// Realifies with the default map `z -> x+iy`, `u -> f+ig`, `up -> h+il`
/// (and `Z`, `U`, `Up` to `X+iY`, `F+iG`, `H+iL`).
pub fn realify(e: &Expr) -> Result<(Expr, Expr), RealifyError> {
    realify_with(e, &RealifyMap::default())
}

pub fn realify_with(e: &Expr, map: &RealifyMap) -> Result<(Expr, Expr), RealifyError> {
    split(e, map)
}
