use lielin::expr::{Binding, Func};
use lielin::{equiv_zero, parse, realify, Alphabet, Expr, Sampler};
use num_complex::Complex64;
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        prop::sample::select(vec!["z", "u", "up"]).prop_map(Expr::var),
        (-4i32..=4).prop_map(|k| Expr::real(k as f64 / 2.0)),
        Just(Expr::imag_unit()),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::sum),
            prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::product),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| &a - &b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::quot(a, b)),
            (inner.clone(), -2i64..=3).prop_map(|(a, n)| Expr::powi(a, n)),
            (
                prop::sample::select(vec![
                    Func::Sin,
                    Func::Cos,
                    Func::Exp,
                    Func::Sinh,
                    Func::Cosh
                ]),
                inner
            )
                .prop_map(|(f, a)| Expr::apply(f, a)),
        ]
    })
}

fn point() -> impl Strategy<Value = [f64; 6]> {
    prop::array::uniform6(-1.5f64..1.5)
}

fn complex_binding(p: &[f64; 6]) -> Binding {
    Binding::new([
        ("z", Complex64::new(p[0], p[1])),
        ("u", Complex64::new(p[2], p[3])),
        ("up", Complex64::new(p[4], p[5])),
    ])
    .unwrap()
}

fn real_binding(p: &[f64; 6]) -> Binding {
    let names = ["x", "y", "f", "g", "h", "l"];
    Binding::new(
        names
            .iter()
            .zip(p)
            .map(|(n, v)| (*n, Complex64::new(*v, 0.0))),
    )
    .unwrap()
}

/// Value and subterm scale, or `None` near poles and overflow.
fn value(e: &Expr, b: &Binding) -> Option<(Complex64, f64)> {
    let (v, m) = e.eval_scaled::<f64>(b).ok()?;
    (m < 1e6).then_some((v, m))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_then_parse_is_a_fixed_point(e in expr()) {
        let text = e.to_string();
        let back = parse(&text, &Alphabet::complex::<&str>(&[])).unwrap();
        prop_assert_eq!(back.to_string(), text);
    }

    #[test]
    fn print_then_parse_keeps_values(e in expr(), p in point()) {
        let back = parse(&e.to_string(), &Alphabet::complex::<&str>(&[])).unwrap();
        let b = complex_binding(&p);
        let (Some((v, m)), Some((w, _))) = (value(&e, &b), value(&back, &b)) else {
            return Ok(());
        };
        prop_assert!((v - w).norm() <= 1e-12 * (1.0 + m), "{} vs {}", v, w);
    }

    #[test]
    fn realify_is_exact(e in expr(), p in point()) {
        let (re, im) = realify(&e).unwrap();
        let Some((v, m)) = value(&e, &complex_binding(&p)) else {
            return Ok(());
        };
        let rb = real_binding(&p);
        let (Ok(r), Ok(i)) = (re.eval::<f64>(&rb), im.eval::<f64>(&rb)) else {
            return Ok(());
        };
        prop_assert!(r.im.abs() < 1e-12 && i.im.abs() < 1e-12);
        let err = (v - Complex64::new(r.re, i.re)).norm();
        prop_assert!(err <= 1e-9 * (1.0 + m), "{}: {} vs {} + {}i", e, v, r.re, i.re);
    }

    #[test]
    fn derivative_matches_central_difference(e in expr(), p in point(), which in 0usize..3) {
        let sym = ["z", "u", "up"][which];
        let d = e.diff(sym);
        let b = complex_binding(&p);
        let Some((dv, _)) = value(&d, &b) else { return Ok(()) };
        let Some((_, m)) = value(&e, &b) else { return Ok(()) };
        let h = 1e-5;
        let shifted = |s: f64| {
            let mut c = b.clone();
            c.set(sym, b.get(sym).unwrap() + Complex64::new(s * h, 0.0));
            value(&e, &c).map(|(v, _)| v)
        };
        let (Some(a), Some(c)) = (shifted(1.0), shifted(-1.0)) else { return Ok(()) };
        let fd = (a - c) / (2.0 * h);
        // cancellation in the difference costs about m * eps / h
        let floor = m * 1e-10;
        prop_assert!(
            (dv - fd).norm() <= 1e-4 * dv.norm().max(1.0) + floor,
            "d/d{} of {}: {} vs {}", sym, e, dv, fd
        );
    }

    #[test]
    fn difference_of_squares_is_zero(e in expr(), seed in 0u64..1000) {
        let one = Expr::one();
        let lhs = &(&e + &one) * &(&e - &one);
        let rhs = &Expr::powi(e.clone(), 2) - &one;
        // expressions singular everywhere exhaust the sampler; nothing to test
        if let Ok(t) = equiv_zero(&(&lhs - &rhs), &mut Sampler::with_seed(seed), 1e-9) {
            prop_assert!(t.is_zero);
        }
    }

    #[test]
    fn canonical_is_idempotent(e in expr()) {
        let c = e.canonical();
        prop_assert_eq!(c.canonical(), c);
    }
}

#[test]
fn shifted_expression_is_not_zero() {
    let a = Alphabet::complex::<&str>(&[]);
    let e = parse("sin(z)^2 + cos(z)^2", &a).unwrap();
    let t = equiv_zero(&e, &mut Sampler::with_seed(1), 1e-9).unwrap();
    assert!(!t.is_zero);
    let t = equiv_zero(&(&e - &Expr::one()), &mut Sampler::with_seed(1), 1e-9).unwrap();
    assert!(t.is_zero);
}
