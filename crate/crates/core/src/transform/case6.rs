//! Canonical map for a non-proportional, non-commuting symmetry pair with
//! parameters `a = a1 + i a2`, `b = b1 + i b2`:
//!
//! ```text
//! Z~ = U + k Z,   U~ = U^2/2 + k Z U + (k^2/2 + 1/(2a)) Z^2,   k = b/(3a)
//! ```
//!
//! written here as a map of `(z, u)` so it composes after any earlier stage.

use num_complex::Complex64;

use super::{
    realify_transformation, ComplexPointTransformation, RealPointTransformation, TransformError,
};
use crate::expr::{parse, Alphabet, Expr};
use crate::report::{Annotation, AnnotationKind};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Case6 {
    pub a: Complex64,
    pub b: Complex64,
}

impl Case6 {
    pub fn new(a1: f64, a2: f64, b1: f64, b2: f64) -> Result<Self, TransformError> {
        if a1 == 0.0 && a2 == 0.0 {
            return Err(TransformError::DegenerateParameters);
        }
        Ok(Case6 {
            a: Complex64::new(a1, a2),
            b: Complex64::new(b1, b2),
        })
    }

    pub fn kappa(&self) -> Complex64 {
        self.b / (3.0 * self.a)
    }

    /// Coefficient of `Z^2` in `U~`.
    pub fn quadratic(&self) -> Complex64 {
        let k = self.kappa();
        k * k / 2.0 + 1.0 / (2.0 * self.a)
    }

    /// Right-hand side of the canonical code this map sends to `U~'' = 0`:
    /// `(a up^3 + b up^2 + (1 + b^2/(3a)) up + b/(3a) + b^3/(27 a^2)) / z`.
    pub fn canonical_rhs(&self) -> Expr {
        let (a, b) = (self.a, self.b);
        let up = Expr::var("up");
        let c = |v: Complex64| Expr::constant(v);
        let poly = Expr::sum(vec![
            &c(a) * &Expr::powi(up.clone(), 3),
            &c(b) * &Expr::powi(up.clone(), 2),
            &c(1.0 + b * b / (3.0 * a)) * &up,
            c(b / (3.0 * a) + b * b * b / (27.0 * a * a)),
        ]);
        Expr::quot(poly, Expr::var("z"))
    }
}

pub fn case6_complex(
    a1: f64,
    a2: f64,
    b1: f64,
    b2: f64,
) -> Result<ComplexPointTransformation, TransformError> {
    let p = Case6::new(a1, a2, b1, b2)?;
    let z = Expr::var("z");
    let u = Expr::var("u");
    let k = Expr::constant(p.kappa());
    let big_z = &u + &(&k * &z);
    let big_u = Expr::sum(vec![
        Expr::powi(u.clone(), 2).scale(0.5),
        Expr::product(vec![k, z.clone(), u]),
        &Expr::constant(p.quadratic()) * &Expr::powi(z, 2),
    ]);
    ComplexPointTransformation::new(big_z, big_u)
}

/// Realified case-6 map in `(x, y, f, g)`.
pub fn case6_canonical_transform(
    a1: f64,
    a2: f64,
    b1: f64,
    b2: f64,
) -> Result<RealPointTransformation, TransformError> {
    Ok(realify_transformation(&case6_complex(a1, a2, b1, b2)?))
}

const PRINTED: [&str; 4] = [
    "F + ((b1*a1 + b2*a2)*X - (b2*a1 - b1*a2)*Y)/(3*(a1^2 + a2^2))",
    "G + ((b1*a1 + b2*a2)*Y + (b2*a1 - b1*a2)*X)/(3*(a1^2 + a2^2))",
    "(F^2 - G^2)/2 + (((b1*a1 + b2*a2)*X - (b2*a1 - b1*a2)*Y)*F - ((b1*a1 + b2*a2)*Y + (b2*a1 - b1*a2)*X)*G)/(3*(a1^2 + a2^2)) \
     + (((b1^2 - b2^2)*(a1^2 - a2^2) + 4*b1*b2*a1*a2)*(X^2 - Y^2) - 2*X*Y*(2*b1*b2*(a1^2 - a2^2) - 2*a1*a2*(b1^2 - b2^2)))/(18*(a1^2 + a2^2)^2) \
     + (a1*(X^2 - Y^2) + 2*a2*X*Y)/(2*(a1^2 + a2^2))",
    "F*G + (((b1*a1 + b2*a2)*X - (b2*a1 - b1*a2)*Y)*G + ((b1*a1 + b2*a2)*Y + (b2*a1 - b1*a2)*X)*F)/(3*(a1^2 + a2^2)) \
     + (2*X*Y*((b1^2 - b2^2)*(a1^2 - a2^2) + 4*b1*b2*a1*a2) - (X^2 - Y^2)*(2*b1*b2*(a1^2 - a2^2) - 2*a1*a2*(b1^2 - b2^2)))/(18*(a1^2 + a2^2)^2) \
     + (2*X*Y*a1 - a2*(X^2 - Y^2))/(2*(a1^2 + a2^2))",
];

/// The real case-6 map exactly as printed, in `(x, y, f, g)`.
pub fn case6_printed(
    a1: f64,
    a2: f64,
    b1: f64,
    b2: f64,
) -> Result<RealPointTransformation, TransformError> {
    Case6::new(a1, a2, b1, b2)?;
    let alphabet = Alphabet::real(&["a1", "a2", "b1", "b2"]);
    let vals = [a1, a2, b1, b2].map(Expr::real);
    let inst = |t: &str| {
        parse(t, &alphabet)
            .expect("printed case-6 forms parse")
            .subs(&[
                ("a1", &vals[0]),
                ("a2", &vals[1]),
                ("b1", &vals[2]),
                ("b2", &vals[3]),
            ])
            .rename(&[("X", "x"), ("Y", "y"), ("F", "f"), ("G", "g")])
    };
    RealPointTransformation::new(PRINTED.map(inst))
}

/// Annotation for the printed `G~` component. The `(X^2 - Y^2)` term of the
/// quadratic part carries the wrong sign, which is invisible when `a` and
/// `b` are both real.
pub fn case6_printed_annotation() -> Annotation {
    Annotation::new(
        AnnotationKind::Typo,
        "G~ = ... - (X^2 - Y^2){2b1b2(a1^2 - a2^2) - 2a1a2(b1^2 - b2^2)} ...",
        "the imaginary part of (b^2/(18a^2)) Z^2 needs + on this term; as printed G~ is not the conjugate of F~",
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{equiv_zero, Sampler, DEFAULT_TOL};
    use crate::transform::same_real_transformation;

    fn r(t: &str) -> Expr {
        parse(t, &Alphabet::real::<&str>(&[])).unwrap()
    }

    fn agree(a: &RealPointTransformation, b: &RealPointTransformation) -> [bool; 4] {
        same_real_transformation(a, b, &mut Sampler::with_seed(6), DEFAULT_TOL)
            .unwrap()
            .map(|t| t.is_zero)
    }

    #[test]
    fn degenerate_parameters() {
        assert_eq!(
            case6_canonical_transform(0.0, 0.0, 1.0, 1.0),
            Err(TransformError::DegenerateParameters)
        );
    }

    #[test]
    fn unit_a_without_b() {
        let t = case6_canonical_transform(1.0, 0.0, 0.0, 0.0).unwrap();
        let want = RealPointTransformation::new([
            r("f"),
            r("g"),
            r("(f^2 - g^2)/2 + (x^2 - y^2)/2"),
            r("f*g + x*y"),
        ])
        .unwrap();
        assert_eq!(agree(&t, &want), [true; 4]);
    }

    #[test]
    fn example_parameters_give_f_minus_two_x() {
        let t = case6_canonical_transform(-1.0, 0.0, 6.0, 0.0).unwrap();
        let e = &t.big_x - &r("f - 2*x");
        assert!(
            equiv_zero(&e, &mut Sampler::with_seed(1), DEFAULT_TOL)
                .unwrap()
                .is_zero
        );
    }

    #[test]
    fn printed_form_matches_for_real_parameters() {
        for (a1, b1) in [(-1.0, 6.0), (2.0, -1.0), (0.5, 0.0)] {
            let n = case6_canonical_transform(a1, 0.0, b1, 0.0).unwrap();
            let p = case6_printed(a1, 0.0, b1, 0.0).unwrap();
            assert_eq!(agree(&n, &p), [true; 4]);
        }
    }

    #[test]
    fn printed_g_differs_for_complex_parameters() {
        let n = case6_canonical_transform(1.0, 0.5, 2.0, -1.0).unwrap();
        let p = case6_printed(1.0, 0.5, 2.0, -1.0).unwrap();
        assert_eq!(agree(&n, &p), [true, true, true, false]);
    }
}
