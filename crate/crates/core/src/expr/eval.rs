use std::collections::BTreeMap;

use num_complex::{Complex, Complex64};
use num_traits::Zero;
use thiserror::Error;

use super::{Expr, Func};
use crate::scalar::{is_finite, lift, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("pole or singularity: {0}")]
    PoleOrSingularity(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BindingError {
    #[error("symbol `{0}` bound twice")]
    Duplicate(String),
}

/// Values for the free variables of an expression.
#[derive(Clone, Debug, PartialEq)]
pub struct Binding<T: Real = f64> {
    values: BTreeMap<String, Complex<T>>,
}

impl<T: Real> Default for Binding<T> {
    fn default() -> Self {
        Binding {
            values: BTreeMap::new(),
        }
    }
}

impl<T: Real> Binding<T> {
    pub fn new<I, S>(pairs: I) -> Result<Self, BindingError>
    where
        I: IntoIterator<Item = (S, Complex<T>)>,
        S: Into<String>,
    {
        let mut b = Binding::default();
        for (k, v) in pairs {
            b.insert(k, v)?;
        }
        Ok(b)
    }

    pub fn insert(
        &mut self,
        name: impl Into<String>,
        value: Complex<T>,
    ) -> Result<(), BindingError> {
        let name = name.into();
        if self.values.contains_key(&name) {
            return Err(BindingError::Duplicate(name));
        }
        self.values.insert(name, value);
        Ok(())
    }

    pub fn insert_real(&mut self, name: impl Into<String>, value: T) -> Result<(), BindingError> {
        self.insert(name, Complex::new(value, T::zero()))
    }

    /// Inserts or replaces. Used by sweeps that re-bind the same symbol.
    pub fn set(&mut self, name: impl Into<String>, value: Complex<T>) {
        self.values.insert(name.into(), value);
    }

    pub fn remove(&mut self, name: &str) -> Option<Complex<T>> {
        self.values.remove(name)
    }

    pub fn get(&self, name: &str) -> Option<Complex<T>> {
        self.values.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Complex<T>)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub(super) fn apply_func<T: Real>(f: Func, a: Complex<T>) -> Result<Complex<T>, EvalError> {
    let v = match f {
        Func::Sin => a.sin(),
        Func::Cos => a.cos(),
        Func::Tan => {
            if a.cos().is_zero() {
                return Err(EvalError::PoleOrSingularity("tan at a pole".into()));
            }
            a.tan()
        }
        Func::Sinh => a.sinh(),
        Func::Cosh => a.cosh(),
        Func::Exp => a.exp(),
        Func::Log => {
            if a.is_zero() {
                return Err(EvalError::PoleOrSingularity("log(0)".into()));
            }
            a.ln()
        }
        Func::Sqrt => a.sqrt(),
        Func::Atan => {
            let i = Complex::new(T::zero(), T::one());
            if a == i || a == -i {
                return Err(EvalError::PoleOrSingularity("atan(±i)".into()));
            }
            a.atan()
        }
    };
    Ok(v)
}

struct Evaluator<'b, T: Real> {
    binding: &'b Binding<T>,
    largest: T,
}

impl<T: Real> Evaluator<'_, T> {
    fn note(&mut self, v: Complex<T>, what: &Expr) -> Result<Complex<T>, EvalError> {
        if !is_finite(&v) {
            return Err(EvalError::NonFinite(short(what)));
        }
        let m = v.norm();
        if m > self.largest {
            self.largest = m;
        }
        Ok(v)
    }

    fn run(&mut self, e: &Expr) -> Result<Complex<T>, EvalError> {
        let v = match e {
            Expr::Const(c) => lift(*c),
            Expr::Var(s) => self
                .binding
                .get(s)
                .ok_or_else(|| EvalError::UnboundVariable(s.clone()))?,
            Expr::Sum(cs) => {
                let mut acc = Complex::new(T::zero(), T::zero());
                for c in cs {
                    acc = acc + self.run(c)?;
                }
                acc
            }
            Expr::Product(cs) => {
                let mut acc = Complex::new(T::one(), T::zero());
                for c in cs {
                    acc = acc * self.run(c)?;
                }
                acc
            }
            Expr::Pow(b, n) => {
                let base = self.run(b)?;
                if *n < 0 && base.is_zero() {
                    return Err(EvalError::PoleOrSingularity(format!(
                        "{} at zero base",
                        short(e)
                    )));
                }
                match i32::try_from(*n) {
                    Ok(k) => base.powi(k),
                    Err(_) => base.powf(T::of(*n as f64)),
                }
            }
            Expr::Quot(n, d) => {
                let num = self.run(n)?;
                let den = self.run(d)?;
                if den.is_zero() {
                    return Err(EvalError::PoleOrSingularity(format!(
                        "division by zero in {}",
                        short(e)
                    )));
                }
                num / den
            }
            Expr::Apply(f, a) => {
                let arg = self.run(a)?;
                apply_func(*f, arg)?
            }
        };
        self.note(v, e)
    }
}

fn short(e: &Expr) -> String {
    let s = e.to_string();
    if s.len() > 60 {
        format!("{}...", &s[..57])
    } else {
        s
    }
}

impl Expr {
    /// Evaluates under principal branches.
    pub fn eval<T: Real>(&self, binding: &Binding<T>) -> Result<Complex<T>, EvalError> {
        self.eval_scaled(binding).map(|(v, _)| v)
    }

    /// Evaluates and also returns the largest magnitude of any subterm.
    pub fn eval_scaled<T: Real>(&self, binding: &Binding<T>) -> Result<(Complex<T>, T), EvalError> {
        let mut ev = Evaluator {
            binding,
            largest: T::zero(),
        };
        let v = ev.run(self)?;
        Ok((v, ev.largest))
    }

    /// `f64` evaluation shortcut.
    pub fn eval64(&self, binding: &Binding) -> Result<Complex64, EvalError> {
        self.eval(binding)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse, Alphabet};
    use super::*;

    fn p(t: &str) -> Expr {
        parse(t, &Alphabet::complex::<&str>(&[])).unwrap()
    }

    fn bind(name: &str, re: f64, im: f64) -> Binding {
        Binding::new([(name, Complex64::new(re, im))]).unwrap()
    }

    #[test]
    fn square_of_one_plus_i() {
        let v = p("u^2").eval(&bind("u", 1.0, 1.0)).unwrap();
        assert!((v - Complex64::new(0.0, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn tan_at_zero() {
        let v = p("tan(z)").eval(&bind("z", 0.0, 0.0)).unwrap();
        assert_eq!(v, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn reciprocal_at_zero_is_a_pole() {
        assert!(matches!(
            p("1/u").eval(&bind("u", 0.0, 0.0)),
            Err(EvalError::PoleOrSingularity(_))
        ));
        assert!(matches!(
            p("log(u)").eval(&bind("u", 0.0, 0.0)),
            Err(EvalError::PoleOrSingularity(_))
        ));
    }

    #[test]
    fn overflow_is_reported() {
        assert!(matches!(
            p("exp(u)").eval(&bind("u", 1000.0, 0.0)),
            Err(EvalError::NonFinite(_))
        ));
    }

    #[test]
    fn unbound_variable() {
        assert!(matches!(
            p("u + z").eval(&bind("u", 1.0, 0.0)),
            Err(EvalError::UnboundVariable(ref s)) if s == "z"
        ));
    }

    #[test]
    fn duplicate_binding_is_rejected() {
        let r = Binding::<f64>::new([
            ("u", Complex64::new(1.0, 0.0)),
            ("u", Complex64::new(2.0, 0.0)),
        ]);
        assert_eq!(r, Err(BindingError::Duplicate("u".into())));
    }

    #[test]
    fn single_precision_evaluation() {
        let b = Binding::<f32>::new([("u", Complex::new(1.0f32, 1.0))]).unwrap();
        let v = p("u^2 + sin(u)").eval(&b).unwrap();
        let w = p("u^2 + sin(u)").eval(&bind("u", 1.0, 1.0)).unwrap();
        assert!((v.re as f64 - w.re).abs() < 1e-5);
        assert!((v.im as f64 - w.im).abs() < 1e-5);
    }
}
