//! Infix printing. The output reparses to the same canonical tree.

use std::fmt;

use num_complex::Complex64;

use super::Expr;

const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const UNARY: u8 = 3;
const POW: u8 = 4;
const ATOM: u8 = 5;

fn real_text(v: f64) -> String {
    // `Display` for f64 is the shortest string that round-trips and never
    // uses exponent notation, which the grammar does not accept.
    format!("{}", v)
}

fn const_text(c: Complex64) -> (String, u8) {
    if c.im == 0.0 {
        if c.re < 0.0 || (c.re == 0.0 && c.re.is_sign_negative()) {
            (format!("-{}", real_text(-c.re)), UNARY)
        } else {
            (real_text(c.re), ATOM)
        }
    } else if c.re == 0.0 && c.im == 1.0 {
        ("i".to_string(), ATOM)
    } else if c.re == 0.0 {
        (format!("({}*i)", real_text(c.im)), ATOM)
    } else if c.im < 0.0 {
        (
            format!("({} - {}*i)", real_text(c.re), real_text(-c.im)),
            ATOM,
        )
    } else {
        (
            format!("({} + {}*i)", real_text(c.re), real_text(c.im)),
            ATOM,
        )
    }
}

fn wrap(s: (String, u8), min: u8) -> String {
    if s.1 < min {
        format!("({})", s.0)
    } else {
        s.0
    }
}

fn negative_real_lead(e: &Expr) -> bool {
    match e {
        Expr::Const(c) => c.im == 0.0 && c.re < 0.0,
        Expr::Product(cs) => {
            matches!(cs.first(), Some(Expr::Const(c)) if c.im == 0.0 && c.re < 0.0)
        }
        _ => false,
    }
}

fn render(e: &Expr) -> (String, u8) {
    match e {
        Expr::Const(c) => const_text(*c),
        Expr::Var(s) => (s.clone(), ATOM),
        Expr::Apply(f, a) => (format!("{}({})", f.name(), render(a).0), ATOM),
        Expr::Pow(b, n) => {
            let base = wrap(render(b), ATOM);
            if *n < 0 {
                (format!("{}^({})", base, n), POW)
            } else {
                (format!("{}^{}", base, n), POW)
            }
        }
        Expr::Quot(n, d) => {
            let num = wrap(render(n), PRODUCT);
            let den = wrap(render(d), POW);
            (format!("{}/{}", num, den), PRODUCT)
        }
        Expr::Product(cs) => {
            let factor = |c: &Expr| wrap(render(c), UNARY + 1);
            match cs.first() {
                Some(Expr::Const(k)) if k.im == 0.0 && k.re == -1.0 => {
                    let rest: Vec<String> = cs[1..].iter().map(factor).collect();
                    (format!("-{}", rest.join("*")), UNARY)
                }
                Some(Expr::Const(k)) if k.im == 0.0 && k.re < 0.0 => {
                    let mut parts = vec![format!("-{}", real_text(-k.re))];
                    parts.extend(cs[1..].iter().map(factor));
                    (parts.join("*"), PRODUCT)
                }
                _ => {
                    let parts: Vec<String> = cs.iter().map(factor).collect();
                    (parts.join("*"), PRODUCT)
                }
            }
        }
        Expr::Sum(cs) => {
            let mut out = String::new();
            for (k, c) in cs.iter().enumerate() {
                if k == 0 {
                    out.push_str(&wrap(render(c), PRODUCT.min(UNARY)));
                } else if negative_real_lead(c) {
                    let negated = c.clone().neg();
                    out.push_str(" - ");
                    out.push_str(&wrap(render(&negated), PRODUCT));
                } else {
                    out.push_str(" + ");
                    out.push_str(&wrap(render(c), PRODUCT));
                }
            }
            (out, SUM)
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self).0)
    }
}
