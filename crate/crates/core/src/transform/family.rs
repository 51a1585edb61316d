use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::codes::Code;
use crate::expr::{
    parse, Alphabet, Binding, Exclusion, Expr, Region, SampleError, Sampler, SamplerConfig,
};

use super::TransformError;

/// Admissible values of one real family parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamRange {
    Interval([f64; 2]),
    Choice { choice: Vec<f64> },
}

impl ParamRange {
    fn region(&self) -> Region {
        match self {
            ParamRange::Interval([lo, hi]) => Region::Interval(*lo, *hi),
            ParamRange::Choice { choice } => Region::Choice(choice.clone()),
        }
    }

    /// Value at position `k` of an `n`-point spread.
    fn pick(&self, k: usize, n: usize) -> f64 {
        match self {
            ParamRange::Interval([lo, hi]) => {
                if n <= 1 {
                    0.5 * (lo + hi)
                } else {
                    lo + (hi - lo) * k as f64 / (n - 1) as f64
                }
            }
            ParamRange::Choice { choice } => choice[k % choice.len()],
        }
    }
}

/// Sampling exclusion as written in family files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExclusionSpec {
    MinAbs { expr: String, min: f64 },
    BranchCut { expr: String, margin: f64 },
    PositiveReal { expr: String },
}

/// One inverse-curve expression, or several branches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Branches {
    One(String),
    Many(Vec<String>),
}

impl Branches {
    fn texts(&self) -> Vec<&str> {
        match self {
            Branches::One(t) => vec![t.as_str()],
            Branches::Many(ts) => ts.iter().map(String::as_str).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectSpec {
    pub re: [f64; 2],
    pub im: [f64; 2],
}

/// On-disk form of a [`SolutionFamily`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyFile {
    pub u: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, ParamRange>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exclusions: Vec<ExclusionSpec>,
    #[serde(default, rename = "z_of_Z", skip_serializing_if = "Option::is_none")]
    pub z_of_big_z: Option<Branches>,
    pub region: RectSpec,
}

/// Closed-form solutions `u(z; params)` of a code, with the region and
/// exclusions where they may be evaluated.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionFamily {
    pub u: Expr,
    pub parameters: Vec<(String, ParamRange)>,
    pub exclusions: Vec<Exclusion>,
    /// Source coordinate `z` as a function of the target coordinate `Z`
    /// along a member of the family. Multivalued inverses list every branch.
    pub z_of_big_z: Vec<Expr>,
    pub region: Region,
    file: FamilyFile,
}

/// Parameter tuples used for grid sweeps.
pub const PARAMETER_TUPLES: usize = 5;

impl SolutionFamily {
    pub fn from_file(file: FamilyFile) -> Result<Self, TransformError> {
        let names: Vec<String> = file.parameters.keys().cloned().collect();
        let alphabet = Alphabet::complex(&names);
        let p = |field: &str, t: &str| {
            parse(t, &alphabet).map_err(|source| TransformError::Parse {
                field: field.to_string(),
                source,
            })
        };
        let u = p("u", &file.u)?;
        let bad: Vec<String> = u
            .free_vars()
            .into_iter()
            .filter(|v| v != "z" && !names.contains(v))
            .collect();
        if !bad.is_empty() {
            return Err(TransformError::Format(format!(
                "family u uses {} besides z and its parameters",
                bad.join(", ")
            )));
        }
        let mut exclusions = Vec::new();
        for x in &file.exclusions {
            exclusions.push(match x {
                ExclusionSpec::MinAbs { expr, min } => Exclusion::MinAbs {
                    expr: p("exclusions", expr)?,
                    min: *min,
                },
                ExclusionSpec::BranchCut { expr, margin } => Exclusion::BranchCut {
                    expr: p("exclusions", expr)?,
                    margin: *margin,
                },
                ExclusionSpec::PositiveReal { expr } => Exclusion::PositiveReal {
                    expr: p("exclusions", expr)?,
                },
            });
        }
        let mut z_of_big_z = Vec::new();
        for t in file.z_of_big_z.iter().flat_map(Branches::texts) {
            let e = p("z_of_Z", t)?;
            if e.contains_var("z") {
                return Err(TransformError::Format("z_of_Z must be written in Z".into()));
            }
            z_of_big_z.push(e);
        }
        Ok(SolutionFamily {
            u,
            parameters: file.parameters.clone().into_iter().collect(),
            exclusions,
            z_of_big_z,
            region: Region::Rect {
                re: (file.region.re[0], file.region.re[1]),
                im: (file.region.im[0], file.region.im[1]),
            },
            file,
        })
    }

    pub fn from_json(json: &str) -> Result<Self, TransformError> {
        let file: FamilyFile =
            serde_json::from_str(json).map_err(|e| TransformError::Format(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn file(&self) -> &FamilyFile {
        &self.file
    }

    pub fn parameter_names(&self) -> Vec<String> {
        self.parameters.iter().map(|(n, _)| n.clone()).collect()
    }

    /// `u'` along the family.
    pub fn up(&self) -> Expr {
        self.u.diff("z")
    }

    /// Tuple `i` of [`PARAMETER_TUPLES`]: parameter `j` takes position
    /// `(i + 2j) mod n` of its spread.
    pub fn parameter_tuple(&self, i: usize) -> Vec<(String, f64)> {
        let n = PARAMETER_TUPLES;
        self.parameters
            .iter()
            .enumerate()
            .map(|(j, (name, r))| (name.clone(), r.pick((i + 2 * j) % n, n)))
            .collect()
    }

    /// Sampler settings: the family region for `z`, parameter ranges, and the
    /// family exclusions, layered on `base`.
    pub fn sampler_config(&self, base: &SamplerConfig) -> SamplerConfig {
        let mut c = base.clone().with_region("z", self.region.clone());
        for (name, r) in &self.parameters {
            c = c.with_region(name, r.region());
        }
        for x in &self.exclusions {
            c = c.exclude(x.clone());
        }
        c
    }

    /// `n` bindings of `z` and the parameters at which every expression in
    /// `exprs` evaluates.
    pub fn draw(
        &self,
        base: &Sampler,
        exprs: &[&Expr],
        n: usize,
    ) -> Result<Vec<Binding>, SampleError> {
        let mut sampler = Sampler::new(self.sampler_config(base.config()));
        let mut symbols: Vec<String> = vec!["z".into()];
        symbols.extend(self.parameter_names());
        for e in exprs {
            for v in e.free_vars() {
                if !symbols.contains(&v) {
                    symbols.push(v);
                }
            }
        }
        let mut guards = Vec::new();
        for e in exprs {
            for g in Exclusion::guards_for(e) {
                if !guards.contains(&g) {
                    guards.push(g);
                }
            }
        }
        sampler.draw_accepted(&symbols, &guards, n, |b| {
            exprs.iter().all(|e| e.eval(b).is_ok())
        })
    }

    /// Regular `nx * ny` grid of cell centres over the `z` rectangle for
    /// parameter tuple `i`, minus points rejected by the exclusions or where
    /// any of `exprs` fails to evaluate.
    pub fn grid(&self, nx: usize, ny: usize, tuple: usize, exprs: &[&Expr]) -> Vec<Binding> {
        let Region::Rect { re, im } = &self.region else {
            return Vec::new();
        };
        let params = self.parameter_tuple(tuple);
        let mut guards = Vec::new();
        for e in exprs {
            guards.extend(Exclusion::guards_for(e));
        }
        let mut out = Vec::new();
        for a in 0..nx {
            for b in 0..ny {
                let x = re.0 + (re.1 - re.0) * (a as f64 + 0.5) / nx as f64;
                let y = im.0 + (im.1 - im.0) * (b as f64 + 0.5) / ny as f64;
                let mut bind = Binding::default();
                bind.set("z", Complex64::new(x, y));
                for (n, v) in &params {
                    bind.set(n.as_str(), Complex64::new(*v, 0.0));
                }
                let rejected = self
                    .exclusions
                    .iter()
                    .chain(&guards)
                    .any(|g| g.rejects(&bind))
                    || exprs.iter().any(|e| e.eval(&bind).is_err());
                if !rejected {
                    out.push(bind);
                }
            }
        }
        out
    }

    /// `u^(n) - w` along the family.
    pub fn residual(&self, code: &Code) -> Expr {
        code.residual_along(&self.u)
    }
}
