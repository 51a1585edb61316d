use super::{Expr, Func};

pub(super) fn diff(e: &Expr, s: &str) -> Expr {
    if !e.contains_var(s) {
        return Expr::zero();
    }
    match e {
        Expr::Const(_) => Expr::zero(),
        Expr::Var(v) => {
            if v == s {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Sum(cs) => Expr::sum(cs.iter().map(|c| diff(c, s)).collect()),
        Expr::Product(cs) => {
            let mut terms = Vec::with_capacity(cs.len());
            for (k, c) in cs.iter().enumerate() {
                let dc = diff(c, s);
                if dc.is_zero() {
                    continue;
                }
                let mut factors: Vec<Expr> = cs
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != k)
                    .map(|(_, x)| x.clone())
                    .collect();
                factors.push(dc);
                terms.push(Expr::product(factors));
            }
            Expr::sum(terms)
        }
        Expr::Pow(b, n) => Expr::product(vec![
            Expr::real(*n as f64),
            Expr::powi((**b).clone(), n - 1),
            diff(b, s),
        ]),
        Expr::Quot(n, d) => {
            let dn = diff(n, s);
            let dd = diff(d, s);
            if dd.is_zero() {
                return Expr::quot(dn, (**d).clone());
            }
            let num = Expr::sum(vec![
                Expr::product(vec![dn, (**d).clone()]),
                Expr::product(vec![(**n).clone(), dd]).neg(),
            ]);
            Expr::quot(num, Expr::powi((**d).clone(), 2))
        }
        Expr::Apply(f, a) => {
            let inner = diff(a, s);
            let a = (**a).clone();
            let outer = match f {
                Func::Sin => Expr::apply(Func::Cos, a),
                Func::Cos => Expr::apply(Func::Sin, a).neg(),
                Func::Tan => Expr::sum(vec![Expr::one(), Expr::powi(Expr::apply(Func::Tan, a), 2)]),
                Func::Sinh => Expr::apply(Func::Cosh, a),
                Func::Cosh => Expr::apply(Func::Sinh, a),
                Func::Exp => Expr::apply(Func::Exp, a),
                Func::Log => Expr::quot(Expr::one(), a),
                Func::Sqrt => Expr::quot(Expr::one(), Expr::apply(Func::Sqrt, a).scale(2.0)),
                Func::Atan => {
                    Expr::quot(Expr::one(), Expr::sum(vec![Expr::one(), Expr::powi(a, 2)]))
                }
            };
            Expr::product(vec![outer, inner])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse, Alphabet};
    use super::*;

    fn p(t: &str) -> Expr {
        parse(t, &Alphabet::complex::<&str>(&[])).unwrap()
    }

    #[test]
    fn square_rule() {
        assert_eq!(p("z^2").diff("z"), p("2*z"));
    }

    #[test]
    fn reciprocal_rule() {
        assert_eq!(p("1/u").diff("u"), p("-1/u^2"));
    }

    #[test]
    fn tangent_rule() {
        assert_eq!(p("tan(z)").diff("z"), p("1 + tan(z)^2"));
    }

    #[test]
    fn independent_symbol_gives_zero() {
        assert!(p("sin(z)*z").diff("u").is_zero());
    }

    #[test]
    fn chain_rule_through_product() {
        assert_eq!(p("exp(3*z)").diff("z"), p("3*exp(3*z)"));
    }
}
