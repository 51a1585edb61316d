//! Scalar abstraction for numeric evaluation.
//!
//! Symbolic trees store their constants as `Complex<f64>`; evaluation is
//! generic over any [`Real`] so the same tree can be evaluated in `f32` for
//! cheap sweeps or `f64` for verification.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive};

/// Real field used as the component type of complex evaluation.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`. Constants in expression trees are `f64`.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Real")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub(crate) fn lift<T: Real>(c: Complex<f64>) -> Complex<T> {
    Complex::new(T::of(c.re), T::of(c.im))
}

pub(crate) fn is_finite<T: Real>(c: &Complex<T>) -> bool {
    c.re.is_finite() && c.im.is_finite()
}
