//! Point transformations, their realification and composition, and checks
//! that a transformation carries a solution family of one equation onto
//! solutions of another.

mod case6;
mod family;
mod verify;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{
    equiv_zero, parse, realify, Alphabet, EvalError, Expr, ParseError, SampleError, Sampler,
    ZeroTest,
};

pub use case6::{
    case6_canonical_transform, case6_complex, case6_printed, case6_printed_annotation, Case6,
};
pub use family::{
    Branches, ExclusionSpec, FamilyFile, ParamRange, RectSpec, SolutionFamily, PARAMETER_TUPLES,
};
pub use verify::{
    jacobian_nonsingular, pushforward_solution, verify_ode_linearization, verify_pde_linearization,
    GridSpec, JacobianCheck, PushedCurve, Stage, StageKind, Verdict, VerificationReport, FD_STEP,
    FD_TOL, JACOBIAN_MIN,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("parse error in `{field}`: {source}")]
    Parse {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("invalid transformation: {0}")]
    Format(String),
    #[error("pushforward denominator Z_z + Z_u u' vanishes on the family")]
    SingularPushforward,
    #[error("Jacobian is singular (min |det| = {min_det:e})")]
    SingularJacobian { min_det: f64 },
    #[error("no closed-form inverse supplied")]
    MissingInverse,
    #[error("case-6 parameter a must be nonzero")]
    DegenerateParameters,
    #[error(transparent)]
    Sampling(#[from] SampleError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn check_vars(
    what: &str,
    e: &Expr,
    allowed: &[&str],
    params: &[String],
) -> Result<(), TransformError> {
    let bad: Vec<String> = e
        .free_vars()
        .into_iter()
        .filter(|v| !allowed.contains(&v.as_str()) && !params.contains(v))
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(TransformError::Format(format!(
            "{what} uses {} outside {{{}}}",
            bad.join(", "),
            allowed.join(", ")
        )))
    }
}

/// `(z, u) -> (Z, U)` with an optional inverse `(z(Z, U), u(Z, U))`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexPointTransformation {
    pub big_z: Expr,
    pub big_u: Expr,
    pub inverse: Option<(Expr, Expr)>,
}

impl ComplexPointTransformation {
    pub fn new(big_z: Expr, big_u: Expr) -> Result<Self, TransformError> {
        check_vars("Z", &big_z, &["z", "u"], &[])?;
        check_vars("U", &big_u, &["z", "u"], &[])?;
        Ok(ComplexPointTransformation {
            big_z,
            big_u,
            inverse: None,
        })
    }

    pub fn with_inverse(mut self, z: Expr, u: Expr) -> Result<Self, TransformError> {
        check_vars("z_inv", &z, &["Z", "U"], &[])?;
        check_vars("u_inv", &u, &["Z", "U"], &[])?;
        self.inverse = Some((z, u));
        Ok(self)
    }

    pub fn identity() -> Self {
        ComplexPointTransformation {
            big_z: Expr::var("z"),
            big_u: Expr::var("u"),
            inverse: Some((Expr::var("Z"), Expr::var("U"))),
        }
    }

    /// `self` after `inner`.
    pub fn after(&self, inner: &ComplexPointTransformation) -> ComplexPointTransformation {
        let s = |e: &Expr| e.subs(&[("z", &inner.big_z), ("u", &inner.big_u)]);
        let inverse = match (&self.inverse, &inner.inverse) {
            (Some((zo, uo)), Some((zi, ui))) => {
                let t = |e: &Expr| e.subs(&[("Z", zo), ("U", uo)]);
                Some((t(zi), t(ui)))
            }
            _ => None,
        };
        ComplexPointTransformation {
            big_z: s(&self.big_z),
            big_u: s(&self.big_u),
            inverse,
        }
    }

    /// `inverse(forward(z, u)) - (z, u)`, when an inverse is known.
    pub fn round_trip(&self) -> Option<[Expr; 2]> {
        let (zi, ui) = self.inverse.as_ref()?;
        let t = |e: &Expr| e.subs(&[("Z", &self.big_z), ("U", &self.big_u)]);
        Some([&t(zi) - &Expr::var("z"), &t(ui) - &Expr::var("u")])
    }

    pub fn to_file(&self) -> TransformFile {
        TransformFile::Complex {
            big_z: self.big_z.to_string(),
            big_u: self.big_u.to_string(),
            z_inv: self.inverse.as_ref().map(|i| i.0.to_string()),
            u_inv: self.inverse.as_ref().map(|i| i.1.to_string()),
        }
    }
}

/// `(x, y, f, g) -> (X, Y, F, G)` with an optional inverse.
#[derive(Clone, Debug, PartialEq)]
pub struct RealPointTransformation {
    pub big_x: Expr,
    pub big_y: Expr,
    pub big_f: Expr,
    pub big_g: Expr,
    pub inverse: Option<[Expr; 4]>,
}

const REAL_IN: [&str; 4] = ["x", "y", "f", "g"];
const REAL_OUT: [&str; 4] = ["X", "Y", "F", "G"];

impl RealPointTransformation {
    pub fn new(c: [Expr; 4]) -> Result<Self, TransformError> {
        for (n, e) in REAL_OUT.iter().zip(&c) {
            check_vars(n, e, &REAL_IN, &[])?;
        }
        let [big_x, big_y, big_f, big_g] = c;
        Ok(RealPointTransformation {
            big_x,
            big_y,
            big_f,
            big_g,
            inverse: None,
        })
    }

    pub fn with_inverse(mut self, inv: [Expr; 4]) -> Result<Self, TransformError> {
        for e in &inv {
            check_vars("inverse", e, &REAL_OUT, &[])?;
        }
        self.inverse = Some(inv);
        Ok(self)
    }

    pub fn identity() -> Self {
        RealPointTransformation {
            big_x: Expr::var("x"),
            big_y: Expr::var("y"),
            big_f: Expr::var("f"),
            big_g: Expr::var("g"),
            inverse: Some(REAL_OUT.map(Expr::var)),
        }
    }

    pub fn components(&self) -> [&Expr; 4] {
        [&self.big_x, &self.big_y, &self.big_f, &self.big_g]
    }

    /// `self` after `inner`.
    pub fn after(&self, inner: &RealPointTransformation) -> RealPointTransformation {
        let ic = inner.components();
        let pairs: Vec<(&str, &Expr)> = REAL_IN.iter().copied().zip(ic).collect();
        let s = |e: &Expr| e.subs(&pairs);
        let inverse = match (&self.inverse, &inner.inverse) {
            (Some(outer), Some(inn)) => {
                let op: Vec<(&str, &Expr)> = REAL_OUT.iter().copied().zip(outer.iter()).collect();
                Some(inn.clone().map(|e| e.subs(&op)))
            }
            _ => None,
        };
        RealPointTransformation {
            big_x: s(&self.big_x),
            big_y: s(&self.big_y),
            big_f: s(&self.big_f),
            big_g: s(&self.big_g),
            inverse,
        }
    }

    pub fn round_trip(&self) -> Option<[Expr; 4]> {
        let inv = self.inverse.as_ref()?;
        let fwd: Vec<(&str, &Expr)> = REAL_OUT.iter().copied().zip(self.components()).collect();
        let mut out = inv.clone().map(|e| e.subs(&fwd));
        for (o, v) in out.iter_mut().zip(REAL_IN) {
            *o = &*o - &Expr::var(v);
        }
        Some(out)
    }

    pub fn to_file(&self) -> TransformFile {
        let s = |e: &Expr| e.to_string();
        TransformFile::Real {
            big_x: s(&self.big_x),
            big_y: s(&self.big_y),
            big_f: s(&self.big_f),
            big_g: s(&self.big_g),
            inverse: self.inverse.as_ref().map(|i| i.iter().map(s).collect()),
        }
    }
}

/// `(X, Y) = realify(Z)`, `(F, G) = realify(U)`; the inverse likewise.
pub fn realify_transformation(t: &ComplexPointTransformation) -> RealPointTransformation {
    let r = |e: &Expr| realify(e).expect("transformations are analytic");
    let (big_x, big_y) = r(&t.big_z);
    let (big_f, big_g) = r(&t.big_u);
    let inverse = t.inverse.as_ref().map(|(zi, ui)| {
        let (a, b) = r(zi);
        let (c, d) = r(ui);
        [a, b, c, d]
    });
    RealPointTransformation {
        big_x,
        big_y,
        big_f,
        big_g,
        inverse,
    }
}

/// Componentwise zero test of `a - b`.
pub fn same_real_transformation(
    a: &RealPointTransformation,
    b: &RealPointTransformation,
    sampler: &mut Sampler,
    tol: f64,
) -> Result<[ZeroTest; 4], TransformError> {
    let mut out = Vec::new();
    for (k, (p, q)) in a.components().iter().zip(b.components()).enumerate() {
        out.push(equiv_zero(&(*p - q), &mut sampler.fork(k as u64), tol)?);
    }
    Ok(out.try_into().expect("four components"))
}

/// On-disk form of a transformation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransformFile {
    Complex {
        #[serde(rename = "Z")]
        big_z: String,
        #[serde(rename = "U")]
        big_u: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        z_inv: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        u_inv: Option<String>,
    },
    Real {
        #[serde(rename = "X")]
        big_x: String,
        #[serde(rename = "Y")]
        big_y: String,
        #[serde(rename = "F")]
        big_f: String,
        #[serde(rename = "G")]
        big_g: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inverse: Option<Vec<String>>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Transformation {
    Complex(ComplexPointTransformation),
    Real(RealPointTransformation),
}

impl TransformFile {
    pub fn compile(&self) -> Result<Transformation, TransformError> {
        let p = |field: &str, t: &str, a: &Alphabet| {
            parse(t, a).map_err(|source| TransformError::Parse {
                field: field.into(),
                source,
            })
        };
        match self {
            TransformFile::Complex {
                big_z,
                big_u,
                z_inv,
                u_inv,
            } => {
                let a = Alphabet::complex::<&str>(&[]);
                let t = ComplexPointTransformation::new(p("Z", big_z, &a)?, p("U", big_u, &a)?)?;
                match (z_inv, u_inv) {
                    (Some(zi), Some(ui)) => Ok(Transformation::Complex(
                        t.with_inverse(p("z_inv", zi, &a)?, p("u_inv", ui, &a)?)?,
                    )),
                    (None, None) => Ok(Transformation::Complex(t)),
                    _ => Err(TransformError::Format(
                        "z_inv and u_inv come together".into(),
                    )),
                }
            }
            TransformFile::Real {
                big_x,
                big_y,
                big_f,
                big_g,
                inverse,
            } => {
                let a = Alphabet::real::<&str>(&[]);
                let t = RealPointTransformation::new([
                    p("X", big_x, &a)?,
                    p("Y", big_y, &a)?,
                    p("F", big_f, &a)?,
                    p("G", big_g, &a)?,
                ])?;
                match inverse {
                    None => Ok(Transformation::Real(t)),
                    Some(v) if v.len() == 4 => {
                        let inv: Vec<Expr> = v
                            .iter()
                            .map(|s| p("inverse", s, &a))
                            .collect::<Result<_, _>>()?;
                        Ok(Transformation::Real(
                            t.with_inverse(inv.try_into().expect("length checked"))?,
                        ))
                    }
                    Some(_) => Err(TransformError::Format(
                        "inverse needs four components".into(),
                    )),
                }
            }
        }
    }
}

pub fn load_transformation(json: &str) -> Result<Transformation, TransformError> {
    let f: TransformFile =
        serde_json::from_str(json).map_err(|e| TransformError::Format(e.to_string()))?;
    f.compile()
}
