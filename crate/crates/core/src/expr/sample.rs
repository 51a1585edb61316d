//! Seeded sampling and the probabilistic zero test.
//!
//! An expression is declared identically zero when it vanishes, to a
//! relative tolerance, at every accepted random sample. Samples that land on
//! a pole, near a branch cut, or inside a caller-supplied exclusion are
//! rejected and redrawn.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::alphabet::{kind_of, SymbolKind};
use super::{Binding, EvalError, Expr, Func};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SAMPLES: usize = 32;
pub const DEFAULT_TOL: f64 = 1e-9;
/// Minimum distance kept from poles and branch cuts.
pub const DEFAULT_EXCLUSION_RADIUS: f64 = 1e-3;
const MAX_REJECTIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("sampler exhausted after {rejections} rejections ({accepted} samples accepted)")]
    SamplerExhausted { rejections: usize, accepted: usize },
}

/// Where a symbol's values are drawn from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Complex rectangle.
    Rect { re: (f64, f64), im: (f64, f64) },
    /// Real interval.
    Interval(f64, f64),
    /// One of a finite set of real values.
    Choice(Vec<f64>),
}

impl Region {
    pub fn square(half: f64) -> Region {
        Region::Rect {
            re: (-half, half),
            im: (-half, half),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Complex64 {
        match self {
            Region::Rect { re, im } => {
                Complex64::new(uniform(rng, re.0, re.1), uniform(rng, im.0, im.1))
            }
            Region::Interval(lo, hi) => Complex64::new(uniform(rng, *lo, *hi), 0.0),
            Region::Choice(vals) => {
                let k = rng.gen_range(0..vals.len().max(1));
                Complex64::new(vals.get(k).copied().unwrap_or(0.0), 0.0)
            }
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Rejection predicate on a candidate sample.
#[derive(Clone, Debug, PartialEq)]
pub enum Exclusion {
    /// Reject when `|expr| < min`.
    MinAbs { expr: Expr, min: f64 },
    /// Reject when `expr` lies within `margin` (in angle) of the negative
    /// real axis, or vanishes.
    BranchCut { expr: Expr, margin: f64 },
    /// Reject when `Re(expr) <= 0`.
    PositiveReal { expr: Expr },
}

impl Exclusion {
    pub fn min_abs(expr: Expr, min: f64) -> Self {
        Exclusion::MinAbs { expr, min }
    }

    /// True when the sample must be rejected.
    pub fn rejects(&self, b: &Binding) -> bool {
        match self {
            Exclusion::MinAbs { expr, min } => match expr.eval(b) {
                Ok(v) => v.norm() < *min,
                Err(_) => true,
            },
            Exclusion::BranchCut { expr, margin } => match expr.eval(b) {
                Ok(v) => v.norm() < *margin || std::f64::consts::PI - v.arg().abs() < *margin,
                Err(_) => true,
            },
            Exclusion::PositiveReal { expr } => match expr.eval(b) {
                Ok(v) => v.re <= 0.0,
                Err(_) => true,
            },
        }
    }

    /// Guards that keep evaluation of `e` away from its poles and cuts.
    pub fn guards_for(e: &Expr) -> Vec<Exclusion> {
        let mut out: Vec<Exclusion> = Vec::new();
        let r = DEFAULT_EXCLUSION_RADIUS;
        e.walk(&mut |node| {
            let g = match node {
                Expr::Quot(_, d) if !d.free_vars().is_empty() => {
                    vec![Exclusion::min_abs((**d).clone(), r)]
                }
                Expr::Pow(b, n) if *n < 0 && !b.free_vars().is_empty() => {
                    vec![Exclusion::min_abs((**b).clone(), r)]
                }
                Expr::Apply(f, a) if !a.free_vars().is_empty() => match f {
                    Func::Log | Func::Sqrt => vec![Exclusion::BranchCut {
                        expr: (**a).clone(),
                        margin: r,
                    }],
                    Func::Tan => vec![Exclusion::min_abs(Expr::apply(Func::Cos, (**a).clone()), r)],
                    Func::Atan => {
                        let ia = Expr::imag_unit() * (**a).clone();
                        vec![
                            Exclusion::BranchCut {
                                expr: Expr::one() + ia.clone(),
                                margin: r,
                            },
                            Exclusion::BranchCut {
                                expr: Expr::one() - ia,
                                margin: r,
                            },
                        ]
                    }
                    _ => vec![],
                },
                _ => vec![],
            };
            for x in g {
                if !out.contains(&x) {
                    out.push(x);
                }
            }
        });
        out
    }
}

/// Sampler configuration; cheap to clone and reproducible.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    pub seed: u64,
    pub samples: usize,
    pub regions: BTreeMap<String, Region>,
    pub complex_default: Region,
    pub real_default: Region,
    pub exclusions: Vec<Exclusion>,
    pub max_rejections: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            seed: DEFAULT_SEED,
            samples: DEFAULT_SAMPLES,
            regions: BTreeMap::new(),
            complex_default: Region::square(2.0),
            real_default: Region::Interval(-2.0, 2.0),
            exclusions: Vec::new(),
            max_rejections: MAX_REJECTIONS,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.samples = n;
        self
    }

    pub fn with_region(mut self, symbol: &str, region: Region) -> Self {
        self.regions.insert(symbol.to_string(), region);
        self
    }

    pub fn exclude(mut self, e: Exclusion) -> Self {
        self.exclusions.push(e);
        self
    }

    pub fn region_of(&self, symbol: &str) -> &Region {
        self.regions.get(symbol).unwrap_or(match kind_of(symbol) {
            SymbolKind::Complex => &self.complex_default,
            SymbolKind::Real | SymbolKind::Parameter => &self.real_default,
        })
    }

    pub fn build(&self) -> Sampler {
        Sampler::new(self.clone())
    }
}

/// Deterministic seeded sample source. Single owner; fork for concurrent use.
#[derive(Clone, Debug)]
pub struct Sampler {
    config: SamplerConfig,
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(config: SamplerConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Sampler { config, rng }
    }

    pub fn with_seed(seed: u64) -> Self {
        Sampler::new(SamplerConfig::default().with_seed(seed))
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    /// Independent sampler with the same configuration and seed `seed + offset`.
    pub fn fork(&self, offset: u64) -> Sampler {
        let mut c = self.config.clone();
        c.seed = c.seed.wrapping_add(offset);
        Sampler::new(c)
    }

    /// One unfiltered draw for the given symbols.
    pub fn draw_raw<'a>(&mut self, symbols: impl IntoIterator<Item = &'a str>) -> Binding {
        let mut b = Binding::default();
        for s in symbols {
            let v = self.config.region_of(s).draw(&mut self.rng);
            b.set(s, v);
        }
        b
    }

    /// Draws `n` bindings that pass every exclusion and `accept`.
    pub fn draw_accepted<F>(
        &mut self,
        symbols: &[String],
        extra: &[Exclusion],
        n: usize,
        mut accept: F,
    ) -> Result<Vec<Binding>, SampleError>
    where
        F: FnMut(&Binding) -> bool,
    {
        let mut out = Vec::with_capacity(n);
        let mut rejections = 0;
        while out.len() < n {
            let b = self.draw_raw(symbols.iter().map(String::as_str));
            let bad = self
                .config
                .exclusions
                .iter()
                .chain(extra)
                .any(|x| x.rejects(&b))
                || !accept(&b);
            if bad {
                rejections += 1;
                if rejections > self.config.max_rejections {
                    return Err(SampleError::SamplerExhausted {
                        rejections,
                        accepted: out.len(),
                    });
                }
                continue;
            }
            out.push(b);
        }
        Ok(out)
    }

    /// Accepted samples for `symbols`, guarded for `e`.
    pub fn draw_for(&mut self, e: &Expr, symbols: &[String]) -> Result<Vec<Binding>, SampleError> {
        let guards = Exclusion::guards_for(e);
        let n = self.config.samples;
        self.draw_accepted(symbols, &guards, n, |b| e.eval(b).is_ok())
    }
}

/// Residual at a single accepted sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleResidual {
    /// `|e|` at the sample.
    pub residual: f64,
    /// `1 + max |subterm|` at the sample.
    pub scale: f64,
}

impl SampleResidual {
    pub fn relative(&self) -> f64 {
        self.residual / self.scale
    }
}

/// Outcome of [`equiv_zero`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZeroTest {
    pub is_zero: bool,
    pub tol: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
    /// Largest residual divided by its scale.
    pub max_relative: f64,
    pub samples: Vec<SampleResidual>,
}

impl ZeroTest {
    /// Fraction of samples whose relative residual exceeds `threshold`.
    pub fn fraction_above(&self, threshold: f64) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let n = self
            .samples
            .iter()
            .filter(|s| s.relative() > threshold)
            .count();
        n as f64 / self.samples.len() as f64
    }
}

/// Probabilistic identity test: `e` vanishes at every accepted sample to
/// `tol * (1 + largest subterm magnitude)`.
pub fn equiv_zero(e: &Expr, sampler: &mut Sampler, tol: f64) -> Result<ZeroTest, SampleError> {
    let symbols: Vec<String> = e.free_vars().into_iter().collect();
    let mut test = ZeroTest {
        is_zero: true,
        tol,
        max_residual: 0.0,
        max_relative: 0.0,
        samples: Vec::new(),
    };
    if symbols.is_empty() {
        let (v, m) = match e.eval_scaled::<f64>(&Binding::default()) {
            Ok(x) => x,
            Err(_) => {
                return Err(SampleError::SamplerExhausted {
                    rejections: 0,
                    accepted: 0,
                })
            }
        };
        record(&mut test, v, m);
        return Ok(test);
    }
    let guards = Exclusion::guards_for(e);
    let n = sampler.config.samples;
    let mut kept = Vec::with_capacity(n);
    sampler.draw_accepted(&symbols, &guards, n, |b| match e.eval_scaled::<f64>(b) {
        Ok(vm) => {
            kept.push(vm);
            true
        }
        Err(EvalError::UnboundVariable(_)) | Err(_) => false,
    })?;
    for (v, m) in kept {
        record(&mut test, v, m);
    }
    Ok(test)
}

fn record(test: &mut ZeroTest, v: Complex64, largest: f64) {
    let s = SampleResidual {
        residual: v.norm(),
        scale: 1.0 + largest,
    };
    test.max_residual = test.max_residual.max(s.residual);
    test.max_relative = test.max_relative.max(s.relative());
    if s.residual > test.tol * s.scale {
        test.is_zero = false;
    }
    test.samples.push(s);
}

#[cfg(test)]
mod tests {
    use super::super::{parse, Alphabet};
    use super::*;

    fn p(t: &str) -> Expr {
        parse(t, &Alphabet::complex::<&str>(&[])).unwrap()
    }

    #[test]
    fn trivial_difference_is_zero() {
        let mut s = Sampler::with_seed(1);
        assert!(
            equiv_zero(&p("z - z"), &mut s, DEFAULT_TOL)
                .unwrap()
                .is_zero
        );
    }

    #[test]
    fn pythagorean_identity() {
        let mut s = Sampler::with_seed(2);
        let t = equiv_zero(&p("sin(z)^2 + cos(z)^2 - 1"), &mut s, DEFAULT_TOL).unwrap();
        assert!(t.is_zero, "max relative {}", t.max_relative);
        assert_eq!(t.samples.len(), DEFAULT_SAMPLES);
    }

    #[test]
    fn product_is_not_zero() {
        let mut s = Sampler::with_seed(3);
        let t = equiv_zero(&p("z*u"), &mut s, DEFAULT_TOL).unwrap();
        assert!(!t.is_zero);
        assert!(t.max_residual > 0.0);
    }

    #[test]
    fn identical_seed_reproduces_samples() {
        let cfg = SamplerConfig::default().with_seed(9);
        let mut a = cfg.build();
        let mut b = cfg.build();
        let syms = ["z".to_string(), "c".to_string()];
        for _ in 0..5 {
            assert_eq!(
                a.draw_raw(syms.iter().map(String::as_str)),
                b.draw_raw(syms.iter().map(String::as_str))
            );
        }
    }

    #[test]
    fn impossible_exclusion_exhausts() {
        let cfg = SamplerConfig::default().exclude(Exclusion::min_abs(Expr::var("z"), 100.0));
        let mut s = cfg.build();
        assert!(matches!(
            equiv_zero(&p("z"), &mut s, DEFAULT_TOL),
            Err(SampleError::SamplerExhausted { .. })
        ));
    }

    #[test]
    fn guards_keep_samples_off_poles_and_cuts() {
        let e = p("1/u + log(z)");
        let g = Exclusion::guards_for(&e);
        assert_eq!(g.len(), 2);
        let b = Binding::new([
            ("u", Complex64::new(1e-4, 0.0)),
            ("z", Complex64::new(1.0, 0.0)),
        ])
        .unwrap();
        assert!(g.iter().any(|x| x.rejects(&b)));
        let c = Binding::new([
            ("u", Complex64::new(1.0, 0.0)),
            ("z", Complex64::new(-1.0, 1e-5)),
        ])
        .unwrap();
        assert!(g.iter().any(|x| x.rejects(&c)));
    }
}
