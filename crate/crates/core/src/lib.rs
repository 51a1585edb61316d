//! Complex Lie-symmetry linearization toolkit.
//!
//! Complex second-order ODEs `u'' = w(z, u, u')` are split into pairs of real
//! PDEs by writing `z = x + iy`, `u = f + ig`. The crate checks the Lie
//! linearizability conditions of the cubic form, classifies pairs of complex
//! symmetries, and verifies point transformations that linearize both the
//! complex equation and its real PDE system against exact solution families.

pub mod codes;
pub mod corpus;
pub mod expr;
pub mod lie;
pub mod report;
pub mod scalar;
pub mod symmetry;
pub mod transform;

pub use expr::{equiv_zero, parse, realify, Alphabet, Expr, Func, Sampler, SamplerConfig};
pub use scalar::Real;

/// Double-precision complex scalar used throughout verification.
pub type ComplexScalar = num_complex::Complex<f64>;
/// Single-precision complex scalar.
pub type ComplexScalar32 = num_complex::Complex<f32>;
/// Variable binding for `f64` evaluation.
pub type Binding = expr::Binding<f64>;
/// Variable binding for `f32` evaluation.
pub type Binding32 = expr::Binding<f32>;
