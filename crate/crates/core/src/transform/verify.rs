use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use super::{ComplexPointTransformation, RealPointTransformation, SolutionFamily, TransformError};
use crate::codes::{Code, RealPdeSystem};
use crate::expr::{realify, realify_with, Binding, Exclusion, Expr, RealifyMap, Sampler};
use crate::report::{num, Annotation, Report};

/// Smallest acceptable `|det|` of a real Jacobian.
pub const JACOBIAN_MIN: f64 = 1e-6;
/// Finite-difference step of the oracle.
pub const FD_STEP: f64 = 1e-3;
/// Absolute tolerance of the oracle.
pub const FD_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageKind {
    SourceResidual,
    Jacobian,
    /// Realified complex map against the real map along the family.
    MapConsistency,
    TargetOdeResidual,
    /// Target system on the realified pushed-forward curve.
    TargetPdeResidual,
    /// Target system through the real map by the two-variable chain rule.
    TargetPdeChainRule,
    FdOracleResidual,
}

impl StageKind {
    pub fn label(self) -> &'static str {
        match self {
            StageKind::SourceResidual => "source-residual",
            StageKind::Jacobian => "jacobian",
            StageKind::MapConsistency => "map-consistency",
            StageKind::TargetOdeResidual => "target-ODE-residual",
            StageKind::TargetPdeResidual => "target-PDE-residual",
            StageKind::TargetPdeChainRule => "target-PDE-chain-rule",
            StageKind::FdOracleResidual => "FD-oracle-residual",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stage {
    pub kind: StageKind,
    /// Largest `|r| / (1 + largest subterm)`; absolute for the oracle.
    pub max_residual: f64,
    pub mean_residual: f64,
    pub max_abs_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_abs_det: Option<f64>,
    pub samples: usize,
    /// Points dropped because they could not be evaluated.
    pub dropped: usize,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

impl Stage {
    fn skipped(kind: StageKind, why: impl Into<String>, tolerance: f64) -> Stage {
        Stage {
            kind,
            max_residual: 0.0,
            mean_residual: 0.0,
            max_abs_residual: 0.0,
            min_abs_det: None,
            samples: 0,
            dropped: 0,
            tolerance,
            passed: true,
            skipped: Some(why.into()),
        }
    }

    fn from_stats(kind: StageKind, s: Stats, tolerance: f64) -> Stage {
        Stage {
            kind,
            max_residual: s.max,
            mean_residual: s.mean(),
            max_abs_residual: s.max_abs,
            min_abs_det: None,
            samples: s.n,
            dropped: s.dropped,
            tolerance,
            passed: s.n > 0 && s.max <= tolerance,
            skipped: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub label: String,
    pub stages: Vec<Stage>,
    pub verdict: Verdict,
    pub annotations: Vec<Annotation>,
}

impl VerificationReport {
    fn new(label: impl Into<String>) -> Self {
        VerificationReport {
            label: label.into(),
            stages: Vec::new(),
            verdict: Verdict::Pass,
            annotations: Vec::new(),
        }
    }

    fn push(&mut self, s: Stage) -> bool {
        let ok = s.passed;
        if !ok {
            self.verdict = Verdict::Fail;
        }
        self.stages.push(s);
        ok
    }

    pub fn stage(&self, kind: StageKind) -> Option<&Stage> {
        self.stages.iter().find(|s| s.kind == kind)
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// One JSON record per stage.
    pub fn json_lines(&self) -> Vec<String> {
        self.stages
            .iter()
            .map(|s| {
                json!({
                    "kind": "verification-stage",
                    "label": self.label,
                    "stage": s,
                    "verdict": self.verdict,
                })
                .to_string()
            })
            .collect()
    }
}

impl Report for VerificationReport {
    fn text(&self) -> String {
        let mut out = format!(
            "{}: {}\n",
            self.label,
            if self.passed() { "PASS" } else { "FAIL" }
        );
        for s in &self.stages {
            if let Some(why) = &s.skipped {
                out += &format!("  {:<22} skipped: {why}\n", s.kind.label());
                continue;
            }
            let body = match s.min_abs_det {
                Some(d) => format!("min |det| {} (> {})", num(d), num(s.tolerance)),
                None => format!(
                    "max {} mean {} (tol {})",
                    num(s.max_residual),
                    num(s.mean_residual),
                    num(s.tolerance)
                ),
            };
            out += &format!(
                "  {:<22} {:<4} {body} over {} points{}\n",
                s.kind.label(),
                if s.passed { "ok" } else { "FAIL" },
                s.samples,
                if s.dropped > 0 {
                    format!(", {} dropped", s.dropped)
                } else {
                    String::new()
                }
            );
        }
        for a in &self.annotations {
            out += &format!("  {a}\n");
        }
        out
    }

    fn json_value(&self) -> serde_json::Value {
        json!({"kind": "verification", "report": self})
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Stats {
    max: f64,
    sum: f64,
    max_abs: f64,
    n: usize,
    dropped: usize,
}

impl Stats {
    fn add(&mut self, scaled: f64, abs: f64) {
        self.max = self.max.max(scaled);
        self.max_abs = self.max_abs.max(abs);
        self.sum += scaled;
        self.n += 1;
    }

    fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    /// Scaled residual of every expression at every point.
    fn over(exprs: &[&Expr], points: &[Binding]) -> Stats {
        let mut s = Stats::default();
        for b in points {
            let mut worst: Option<(f64, f64)> = Some((0.0, 0.0));
            for e in exprs {
                match e.eval_scaled::<f64>(b) {
                    Ok((v, m)) => {
                        if let Some(w) = worst.as_mut() {
                            w.0 = w.0.max(v.norm() / (1.0 + m));
                            w.1 = w.1.max(v.norm());
                        }
                    }
                    Err(_) => worst = None,
                }
            }
            match worst {
                Some((sc, ab)) => s.add(sc, ab),
                None => s.dropped += 1,
            }
        }
        s
    }
}

/// Curve `(Z, U, U', U'')` in `z` and the family parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct PushedCurve {
    pub big_z: Expr,
    pub big_u: Expr,
    /// `dZ/dz = Z_z + Z_u u'` along the family.
    pub dz: Expr,
    pub up: Expr,
    pub upp: Expr,
}

/// Carries the family through `t` by the chain rule.
pub fn pushforward_solution(
    fam: &SolutionFamily,
    t: &ComplexPointTransformation,
    sampler: &Sampler,
) -> Result<PushedCurve, TransformError> {
    let on = |e: &Expr| e.subs(&[("u", &fam.u)]);
    let big_z = on(&t.big_z);
    let big_u = on(&t.big_u);
    let dz = big_z.diff("z");
    let points = fam.draw(sampler, &[&dz], sampler.config().samples)?;
    let scale: f64 = points
        .iter()
        .filter_map(|b| dz.eval_scaled::<f64>(b).ok())
        .map(|(v, m)| v.norm() / (1.0 + m))
        .fold(0.0, f64::max);
    if scale < 1e-12 {
        return Err(TransformError::SingularPushforward);
    }
    let up = Expr::quot(big_u.diff("z"), dz.clone());
    let upp = Expr::quot(up.diff("z"), dz.clone());
    Ok(PushedCurve {
        big_z,
        big_u,
        dz,
        up,
        upp,
    })
}

fn target_residual(target: &Code, c: &PushedCurve) -> Expr {
    let w = target
        .rhs()
        .subs(&[("z", &c.big_z), ("u", &c.big_u), ("up", &c.up)]);
    match target {
        Code::First(_) => &c.up - &w,
        _ => &c.upp - &w,
    }
}

/// Source residual of the family, then the target residual of its image.
pub fn verify_ode_linearization(
    source: &Code,
    t: &ComplexPointTransformation,
    target: &Code,
    fam: &SolutionFamily,
    sampler: &Sampler,
    tol: f64,
) -> Result<VerificationReport, TransformError> {
    let mut rep = VerificationReport::new("ODE linearization");
    let n = sampler.config().samples;
    let r = fam.residual(source);
    let pts = fam.draw(&sampler.fork(1), &[&r], n)?;
    if !rep.push(Stage::from_stats(
        StageKind::SourceResidual,
        Stats::over(&[&r], &pts),
        tol,
    )) {
        return Ok(rep);
    }
    let curve = pushforward_solution(fam, t, &sampler.fork(2))?;
    let rt = target_residual(target, &curve);
    let pts = fam.draw(&sampler.fork(3), &[&rt], n)?;
    rep.push(Stage::from_stats(
        StageKind::TargetOdeResidual,
        Stats::over(&[&rt], &pts),
        tol,
    ));
    Ok(rep)
}

/// Grid for the PDE stages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub tuples: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            nx: 12,
            ny: 12,
            tuples: super::PARAMETER_TUPLES,
        }
    }
}

/// `(x, y)` plus the parameters from a complex `z` binding.
fn real_point(b: &Binding) -> Binding {
    let mut r = Binding::default();
    for (k, v) in b.iter() {
        if k == "z" {
            r.set("x", Complex64::new(v.re, 0.0));
            r.set("y", Complex64::new(v.im, 0.0));
        } else {
            r.set(k, v);
        }
    }
    r
}

/// Printed-operator residuals `weight * L - rhs` for a pair `(F, G)` of
/// functions of `(x, y)`. Derivatives are taken through `dx`, `dy`.
fn operator_residual(
    sys: &RealPdeSystem,
    big_f: &Expr,
    big_g: &Expr,
    coords: [&Expr; 2],
    dx: &dyn Fn(&Expr) -> Expr,
    dy: &dyn Fn(&Expr) -> Expr,
) -> [Expr; 2] {
    let (fx, fy, gx, gy) = (dx(big_f), dy(big_f), dx(big_g), dy(big_g));
    let half = |e: Expr| e.scale(0.5);
    let h = half(&fx + &gy);
    let l = half(&gx - &fy);
    let subs = |e: &Expr| {
        e.subs(&[
            ("x", coords[0]),
            ("y", coords[1]),
            ("f", big_f),
            ("g", big_g),
            ("h", &h),
            ("l", &l),
        ])
    };
    let w = sys.convention_weight;
    if sys.order == 1 {
        [
            &(&fx + &gy).scale(w) - &subs(&sys.rhs_re),
            &(&gx - &fy).scale(w) - &subs(&sys.rhs_im),
        ]
    } else {
        let l1 = Expr::sum(vec![dx(&fx), dy(&fy).neg(), dy(&gx).scale(2.0)]);
        let l2 = Expr::sum(vec![dx(&gx), dy(&gy).neg(), dy(&fx).scale(-2.0)]);
        [
            &l1.scale(w) - &subs(&sys.rhs_re),
            &l2.scale(w) - &subs(&sys.rhs_im),
        ]
    }
}

/// `d/dz + up d/du + upp d/dup` on jet expressions.
fn total_z(e: &Expr) -> Expr {
    Expr::sum(vec![
        e.diff("z"),
        &Expr::var("up") * &e.diff("u"),
        &Expr::var("upp") * &e.diff("up"),
    ])
}

const REAL_JET: [&str; 4] = ["x", "y", "f", "g"];

/// Target operators through a real map by the two-variable chain rule, with
/// the map's partials kept symbolic and the composition done in numbers.
struct ChainRule {
    /// Partials of `X, Y, F, G` in `(x, y, f, g)`: value, first, second.
    d0: Vec<Expr>,
    d1: Vec<Vec<Expr>>,
    d2: Vec<Vec<Vec<Expr>>>,
    /// `f, g` of the family and their `(x, y)` partials.
    fam: [Expr; 2],
    fam1: [[Expr; 2]; 2],
    fam2: [[[Expr; 2]; 2]; 2],
}

impl ChainRule {
    fn new(rt: &RealPointTransformation, f: &Expr, g: &Expr) -> Self {
        let d0: Vec<Expr> = rt.components().into_iter().cloned().collect();
        let d1: Vec<Vec<Expr>> = d0
            .iter()
            .map(|c| REAL_JET.iter().map(|v| c.diff(v)).collect())
            .collect();
        let d2 = d1
            .iter()
            .map(|row| {
                row.iter()
                    .map(|c| REAL_JET.iter().map(|v| c.diff(v)).collect())
                    .collect()
            })
            .collect();
        let first = |e: &Expr| [e.diff("x"), e.diff("y")];
        let second = |e: &Expr| first(e).map(|d| first(&d));
        ChainRule {
            d0,
            d1,
            d2,
            fam: [f.clone(), g.clone()],
            fam1: [first(f), first(g)],
            fam2: [second(f), second(g)],
        }
    }

    /// Scaled and absolute residual at a point binding `x, y` and the
    /// family parameters.
    #[allow(clippy::needless_range_loop)]
    fn residual(&self, target: &RealPdeSystem, b: &Binding) -> Option<(f64, f64)> {
        let ev = |e: &Expr, b: &Binding| e.eval::<f64>(b).ok().map(|v| v.re);
        let mut full = b.clone();
        let mut s1 = [[0.0; 4]; 2];
        let mut s2 = [[[0.0; 4]; 2]; 2];
        for k in 0..2 {
            let v = ev(&self.fam[k], b)?;
            full.set(REAL_JET[2 + k], Complex64::new(v, 0.0));
            for i in 0..2 {
                s1[i][i] = 1.0;
                s1[i][2 + k] = ev(&self.fam1[k][i], b)?;
                for j in 0..2 {
                    s2[i][j][2 + k] = ev(&self.fam2[k][i][j], b)?;
                }
            }
        }
        let mut c1 = [[0.0; 4]; 4];
        let mut c2 = [[[0.0; 4]; 4]; 4];
        for k in 0..4 {
            for a in 0..4 {
                c1[k][a] = ev(&self.d1[k][a], &full)?;
                for c in 0..4 {
                    c2[k][a][c] = ev(&self.d2[k][a][c], &full)?;
                }
            }
        }
        // total derivatives in (x, y)
        let mut t1 = [[0.0; 2]; 4];
        let mut t2 = [[[0.0; 2]; 2]; 4];
        for k in 0..4 {
            for i in 0..2 {
                t1[k][i] = (0..4).map(|a| c1[k][a] * s1[i][a]).sum();
                for j in 0..2 {
                    let mut v = 0.0;
                    for a in 0..4 {
                        v += c1[k][a] * s2[i][j][a];
                        for c in 0..4 {
                            v += c2[k][a][c] * s1[i][a] * s1[j][c];
                        }
                    }
                    t2[k][i][j] = v;
                }
            }
        }
        let det = t1[0][0] * t1[1][1] - t1[0][1] * t1[1][0];
        if det.abs() < JACOBIAN_MIN {
            return None;
        }
        let inv = [
            [t1[1][1] / det, -t1[0][1] / det],
            [-t1[1][0] / det, t1[0][0] / det],
        ];
        // gradient and Hessian of F and G in (X, Y)
        let mut grad = [[0.0; 2]; 2];
        let mut hess = [[[0.0; 2]; 2]; 2];
        for (p, k) in [2, 3].into_iter().enumerate() {
            for m in 0..2 {
                grad[p][m] = (0..2).map(|i| inv[i][m] * t1[k][i]).sum();
            }
            let mut a = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    a[i][j] = t2[k][i][j] - (0..2).map(|m| grad[p][m] * t2[m][i][j]).sum::<f64>();
                }
            }
            for m in 0..2 {
                for n in 0..2 {
                    let mut v = 0.0;
                    for i in 0..2 {
                        for j in 0..2 {
                            v += inv[i][m] * a[i][j] * inv[j][n];
                        }
                    }
                    hess[p][m][n] = v;
                }
            }
        }
        let [[fx, fy], [gx, gy]] = grad;
        let (l1, l2) = if target.order == 1 {
            (fx + gy, gx - fy)
        } else {
            let [ff, gg] = hess;
            (
                ff[0][0] - ff[1][1] + 2.0 * gg[0][1],
                gg[0][0] - gg[1][1] - 2.0 * ff[0][1],
            )
        };
        let mut tb = b.clone();
        for (k, name) in REAL_JET.iter().enumerate() {
            tb.set(*name, Complex64::new(ev(&self.d0[k], &full)?, 0.0));
        }
        tb.set("h", Complex64::new(0.5 * (fx + gy), 0.0));
        tb.set("l", Complex64::new(0.5 * (gx - fy), 0.0));
        let w = target.convention_weight;
        let (r1, m1) = target.rhs_re.eval_scaled::<f64>(&tb).ok()?;
        let (r2, m2) = target.rhs_im.eval_scaled::<f64>(&tb).ok()?;
        let e1 = (w * l1 - r1.re).abs();
        let e2 = (w * l2 - r2.re).abs();
        let scale = 1.0 + m1.max(m2).max((w * l1).abs()).max((w * l2).abs());
        Some((e1.max(e2) / scale, e1.max(e2)))
    }
}

/// Jacobian of the real map as 16 partials.
fn jacobian_entries(rt: &RealPointTransformation) -> Vec<Expr> {
    let mut out = Vec::with_capacity(16);
    for c in rt.components() {
        for v in ["x", "y", "f", "g"] {
            out.push(c.diff(v));
        }
    }
    out
}

#[allow(clippy::needless_range_loop)]
fn det4(m: [[f64; 4]; 4]) -> f64 {
    let mut a = m;
    let mut det = 1.0;
    for col in 0..4 {
        let piv = (col..4)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..4 {
            let k = a[r][col] / a[col][col];
            for c in col..4 {
                a[r][c] -= k * a[col][c];
            }
        }
    }
    det
}

fn det_at(entries: &[Expr], b: &Binding) -> Option<f64> {
    let mut m = [[0.0; 4]; 4];
    for (k, e) in entries.iter().enumerate() {
        m[k / 4][k % 4] = e.eval::<f64>(b).ok()?.re;
    }
    Some(det4(m))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JacobianCheck {
    pub nonsingular: bool,
    pub min_abs_det: f64,
    pub samples: usize,
}

/// `|det d(X,Y,F,G)/d(x,y,f,g)|` at accepted samples of `(x, y, f, g)`.
pub fn jacobian_nonsingular(
    rt: &RealPointTransformation,
    sampler: &mut Sampler,
) -> Result<JacobianCheck, TransformError> {
    let entries = jacobian_entries(rt);
    let all = Expr::sum(entries.clone());
    let symbols: Vec<String> = ["x", "y", "f", "g"].map(String::from).to_vec();
    let mut guards = Exclusion::guards_for(&all);
    for c in rt.components() {
        guards.extend(Exclusion::guards_for(c));
    }
    let n = sampler.config().samples;
    let pts = sampler.draw_accepted(&symbols, &guards, n, |b| det_at(&entries, b).is_some())?;
    let min = pts
        .iter()
        .filter_map(|b| det_at(&entries, b))
        .map(f64::abs)
        .fold(f64::INFINITY, f64::min);
    Ok(JacobianCheck {
        nonsingular: min > JACOBIAN_MIN,
        min_abs_det: min,
        samples: pts.len(),
    })
}

/// Staged check that `rt` carries the family, a solution of `source`, onto
/// solutions of `target`.
#[allow(clippy::too_many_arguments)]
pub fn verify_pde_linearization(
    source: &RealPdeSystem,
    rt: &RealPointTransformation,
    complex: Option<&ComplexPointTransformation>,
    target: &RealPdeSystem,
    fam: &SolutionFamily,
    grid: GridSpec,
    tol: f64,
) -> Result<VerificationReport, TransformError> {
    let mut rep = VerificationReport::new("PDE linearization");
    let (fr, gr) = realify(&fam.u).expect("families are analytic");
    let x = Expr::var("x");
    let y = Expr::var("y");
    let dx = |e: &Expr| e.diff("x");
    let dy = |e: &Expr| e.diff("y");

    let mut points = Vec::new();
    for i in 0..grid.tuples {
        points.extend(fam.grid(grid.nx, grid.ny, i, &[&fam.u]));
    }
    let real_pts: Vec<Binding> = points.iter().map(real_point).collect();

    // 1: source system on the realified family
    let src = operator_residual(source, &fr, &gr, [&x, &y], &dx, &dy);
    let s1 = Stats::over(&[&src[0], &src[1]], &real_pts);
    if !rep.push(Stage::from_stats(StageKind::SourceResidual, s1, tol)) {
        return Ok(rep);
    }

    // family jets at every point: (x, y, f, g, h, l) and u'' as (hp, lp)
    let u1 = fam.up();
    let u2 = u1.diff("z");
    let jets: Vec<Option<Binding>> = points
        .iter()
        .zip(&real_pts)
        .map(|(c, r)| {
            let mut b = r.clone();
            for (e, re, im) in [(&fam.u, "f", "g"), (&u1, "h", "l"), (&u2, "hp", "lp")] {
                let v = e.eval::<f64>(c).ok()?;
                b.set(re, Complex64::new(v.re, 0.0));
                b.set(im, Complex64::new(v.im, 0.0));
            }
            Some(b)
        })
        .collect();
    let valid: Vec<Binding> = jets.iter().flatten().cloned().collect();
    let lost = jets.len() - valid.len();

    // 2: Jacobian along the family
    let entries = jacobian_entries(rt);
    let mut min_det = f64::INFINITY;
    let mut dropped = lost;
    for b in &valid {
        match det_at(&entries, b) {
            Some(d) => min_det = min_det.min(d.abs()),
            None => dropped += 1,
        }
    }
    let n_ok = real_pts.len() - dropped;
    rep.push(Stage {
        kind: StageKind::Jacobian,
        max_residual: 0.0,
        mean_residual: 0.0,
        max_abs_residual: 0.0,
        min_abs_det: Some(min_det),
        samples: n_ok,
        dropped,
        tolerance: JACOBIAN_MIN,
        passed: n_ok > 0 && min_det > JACOBIAN_MIN,
        skipped: None,
    });

    // 3a: the complex map prolonged to u'' and realified
    if let Some(t) = complex {
        let map = RealifyMap::default().with("upp", "hp", "lp");
        let r = |e: &Expr| realify_with(e, &map).expect("point maps are analytic");
        let (cx, cy) = r(&t.big_z);
        let (cf, cg) = r(&t.big_u);
        let cons = [
            &rt.big_x - &cx,
            &rt.big_y - &cy,
            &rt.big_f - &cf,
            &rt.big_g - &cg,
        ];
        let mut s = Stats::over(&cons.iter().collect::<Vec<_>>(), &valid);
        s.dropped += lost;
        rep.push(Stage::from_stats(StageKind::MapConsistency, s, tol));

        let dz = total_z(&t.big_z);
        let up = Expr::quot(total_z(&t.big_u), dz.clone());
        let (h, l) = r(&up);
        let (p1, p2) = if target.order == 1 {
            (h.clone(), l.clone())
        } else {
            r(&Expr::quot(total_z(&up), dz))
        };
        let subs = |e: &Expr| {
            e.subs(&[
                ("x", &cx),
                ("y", &cy),
                ("f", &cf),
                ("g", &cg),
                ("h", &h),
                ("l", &l),
            ])
        };
        let res = [&p1 - &subs(&target.rhs_re), &p2 - &subs(&target.rhs_im)];
        let mut s = Stats::over(&[&res[0], &res[1]], &valid);
        s.dropped += lost;
        rep.push(Stage::from_stats(StageKind::TargetPdeResidual, s, tol));
    } else {
        rep.push(Stage::skipped(
            StageKind::TargetPdeResidual,
            "no complex map supplied",
            tol,
        ));
    }

    // 3b: the real map alone, by the chain rule in two variables
    let chain = ChainRule::new(rt, &fr, &gr);
    let mut s = Stats::default();
    for b in &real_pts {
        match chain.residual(target, b) {
            Some((sc, ab)) => s.add(sc, ab),
            None => s.dropped += 1,
        }
    }
    rep.push(Stage::from_stats(StageKind::TargetPdeChainRule, s, tol));

    // 4: finite differences in (X, Y) through the family's inverse curve
    match fam.z_of_big_z.as_slice() {
        [] => {
            rep.push(Stage::skipped(
                StageKind::FdOracleResidual,
                "family has no closed-form z(Z)",
                FD_TOL,
            ));
        }
        branches => {
            let s = fd_oracle(target, rt, fam, branches, &points);
            let mut stage = Stage::from_stats(StageKind::FdOracleResidual, s, FD_TOL);
            // most of the grid must be judged
            stage.passed &= stage.dropped * 10 <= points.len();
            rep.push(stage);
        }
    }
    Ok(rep)
}

/// `(F, G)` at target point `big_z` on the curve through `z0`, or `None`
/// when the inverse curve leaves the branch through `z0`.
struct Probe<'a> {
    rt: &'a RealPointTransformation,
    fam: &'a SolutionFamily,
    zeta: &'a Expr,
    params: Binding,
}

/// The branch of `z(Z)` passing through `z0` at `big_z`.
fn branch_through<'a>(
    branches: &'a [Expr],
    params: &Binding,
    big_z: Complex64,
    z0: Complex64,
) -> Option<&'a Expr> {
    let mut b = params.clone();
    b.set("Z", big_z);
    branches.iter().find(|e| {
        e.eval::<f64>(&b)
            .map(|z| (z - z0).norm() <= 1e-7 * (1.0 + z0.norm()))
            .unwrap_or(false)
    })
}

impl Probe<'_> {
    fn map(&self, z: Complex64) -> Option<[f64; 4]> {
        let mut b = self.params.clone();
        b.set("z", z);
        let u = self.fam.u.eval::<f64>(&b).ok()?;
        let mut r = self.params.clone();
        for (k, v) in [("x", z.re), ("y", z.im), ("f", u.re), ("g", u.im)] {
            r.set(k, Complex64::new(v, 0.0));
        }
        let mut out = [0.0; 4];
        for (o, c) in out.iter_mut().zip(self.rt.components()) {
            *o = c.eval::<f64>(&r).ok()?.re;
        }
        Some(out)
    }

    fn at(&self, big_z: Complex64, z0: Complex64) -> Option<(f64, f64)> {
        let mut b = self.params.clone();
        b.set("Z", big_z);
        let z = self.zeta.eval::<f64>(&b).ok()?;
        if (z - z0).norm() > 1e3 * FD_STEP * (1.0 + z0.norm()) {
            return None;
        }
        let m = self.map(z)?;
        let back = Complex64::new(m[0], m[1]);
        if (back - big_z).norm() > 1e-8 * (1.0 + big_z.norm()) {
            return None;
        }
        Some((m[2], m[3]))
    }
}

fn fd_oracle(
    target: &RealPdeSystem,
    rt: &RealPointTransformation,
    fam: &SolutionFamily,
    branches: &[Expr],
    points: &[Binding],
) -> Stats {
    let h = FD_STEP;
    let mut s = Stats::default();
    for b in points {
        let z0 = b.get("z").expect("grid binds z");
        let mut params = b.clone();
        params.set("z", Complex64::new(0.0, 0.0));
        let Some(m0) = (Probe {
            rt,
            fam,
            zeta: &branches[0],
            params: params.clone(),
        })
        .map(z0) else {
            s.dropped += 1;
            continue;
        };
        let c = Complex64::new(m0[0], m0[1]);
        let Some(zeta) = branch_through(branches, &params, c, z0) else {
            s.dropped += 1;
            continue;
        };
        let probe = Probe {
            rt,
            fam,
            zeta,
            params,
        };
        // step doubling: a stencil that cannot resolve the curve here shows
        // a truncation estimate above the tolerance and is not judged
        let (Some(r1), Some(r2)) = (
            fd_residual(target, &probe, c, z0, h),
            fd_residual(target, &probe, c, z0, 2.0 * h),
        ) else {
            s.dropped += 1;
            continue;
        };
        let trunc = ((r2[0] - r1[0]).abs()).max((r2[1] - r1[1]).abs()) / 3.0;
        let e = r1[0].abs().max(r1[1].abs());
        let moved = (r2[0] - r1[0]).abs().max((r2[1] - r1[1]).abs());
        if trunc > FD_TOL && moved > e {
            s.dropped += 1;
            continue;
        }
        s.add(e, e);
    }
    s
}

/// Signed residual of the target operators from a 3x3 stencil of step `h`.
fn fd_residual(
    target: &RealPdeSystem,
    probe: &Probe,
    c: Complex64,
    z0: Complex64,
    h: f64,
) -> Option<[f64; 2]> {
    let mut vals = [[(0.0, 0.0); 3]; 3];
    for (i, dxs) in [-1.0, 0.0, 1.0].iter().enumerate() {
        for (j, dys) in [-1.0, 0.0, 1.0].iter().enumerate() {
            vals[i][j] = probe.at(c + Complex64::new(dxs * h, dys * h), z0)?;
        }
    }
    let f = |i: usize, j: usize| vals[i][j].0;
    let g = |i: usize, j: usize| vals[i][j].1;
    let fx = (f(2, 1) - f(0, 1)) / (2.0 * h);
    let fy = (f(1, 2) - f(1, 0)) / (2.0 * h);
    let gx = (g(2, 1) - g(0, 1)) / (2.0 * h);
    let gy = (g(1, 2) - g(1, 0)) / (2.0 * h);
    let w = target.convention_weight;
    let (l1, l2) = if target.order == 1 {
        (fx + gy, gx - fy)
    } else {
        let d2 = |p: &dyn Fn(usize, usize) -> f64| {
            (
                (p(2, 1) - 2.0 * p(1, 1) + p(0, 1)) / (h * h),
                (p(1, 2) - 2.0 * p(1, 1) + p(1, 0)) / (h * h),
                (p(2, 2) - p(2, 0) - p(0, 2) + p(0, 0)) / (4.0 * h * h),
            )
        };
        let (fxx, fyy, fxy) = d2(&f);
        let (gxx, gyy, gxy) = d2(&g);
        (fxx - fyy + 2.0 * gxy, gxx - gyy - 2.0 * fxy)
    };
    let mut tb = probe.params.clone();
    for (k, v) in [
        ("x", c.re),
        ("y", c.im),
        ("f", f(1, 1)),
        ("g", g(1, 1)),
        ("h", 0.5 * (fx + gy)),
        ("l", 0.5 * (gx - fy)),
    ] {
        tb.set(k, Complex64::new(v, 0.0));
    }
    let r1 = target.rhs_re.eval::<f64>(&tb).ok()?;
    let r2 = target.rhs_im.eval::<f64>(&tb).ok()?;
    Some([w * l1 - r1.re, w * l2 - r2.re])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{decompose, FirstOrderCode};
    use crate::expr::{parse, Alphabet, DEFAULT_TOL};
    use crate::transform::realify_transformation;

    fn c(t: &str) -> Expr {
        parse(t, &Alphabet::complex::<&str>(&[])).unwrap()
    }

    fn riccati_parts() -> (Code, ComplexPointTransformation, Code, SolutionFamily) {
        let src = Code::First(FirstOrderCode::new(c("-u^2")).unwrap());
        let t = ComplexPointTransformation::new(c("z"), c("1/u - z"))
            .unwrap()
            .with_inverse(c("Z"), c("1/(U+Z)"))
            .unwrap();
        let tgt = Code::First(FirstOrderCode::new(Expr::zero()).unwrap());
        let fam = SolutionFamily::from_json(
            r#"{"u": "1/(z+c)", "parameters": {"c": [-1, 1]},
                "exclusions": [{"kind": "min_abs", "expr": "z+c", "min": 0.2}],
                "z_of_Z": "Z", "region": {"re": [-2, 2], "im": [-2, 2]}}"#,
        )
        .unwrap();
        (src, t, tgt, fam)
    }

    #[test]
    fn determinant_of_a_permutation() {
        let mut m = [[0.0; 4]; 4];
        m[0][1] = 1.0;
        m[1][0] = 1.0;
        m[2][2] = 2.0;
        m[3][3] = 3.0;
        assert_eq!(det4(m), -6.0);
    }

    #[test]
    fn riccati_ode_pipeline() {
        let (src, t, tgt, fam) = riccati_parts();
        let s = Sampler::with_seed(42);
        let rep = verify_ode_linearization(&src, &t, &tgt, &fam, &s, DEFAULT_TOL).unwrap();
        assert!(rep.passed(), "{}", rep.text());
        let curve = pushforward_solution(&fam, &t, &s).unwrap();
        assert!(
            crate::expr::equiv_zero(
                &(&curve.big_u - &Expr::var("c")),
                &mut Sampler::with_seed(1),
                1e-9
            )
            .unwrap()
            .is_zero
        );
        let id = ComplexPointTransformation::identity();
        let rep = verify_ode_linearization(&src, &id, &tgt, &fam, &s, DEFAULT_TOL).unwrap();
        assert!(!rep.passed());
        assert!(!rep.stage(StageKind::TargetOdeResidual).unwrap().passed);
    }

    #[test]
    fn riccati_pde_pipeline() {
        let (src, t, tgt, fam) = riccati_parts();
        let rt = realify_transformation(&t);
        let rep = verify_pde_linearization(
            &decompose(&src),
            &rt,
            Some(&t),
            &decompose(&tgt),
            &fam,
            GridSpec::default(),
            DEFAULT_TOL,
        )
        .unwrap();
        assert!(rep.passed(), "{}", rep.text());
        assert!(rep.stage(StageKind::FdOracleResidual).unwrap().samples > 100);
    }

    #[test]
    fn jacobian_examples() {
        let mut s = Sampler::with_seed(5);
        let id = jacobian_nonsingular(&RealPointTransformation::identity(), &mut s).unwrap();
        assert!(id.nonsingular && (id.min_abs_det - 1.0).abs() < 1e-15);
        let (_, t, _, _) = riccati_parts();
        assert!(
            jacobian_nonsingular(&realify_transformation(&t), &mut s)
                .unwrap()
                .nonsingular
        );
        let k =
            RealPointTransformation::new([Expr::one(), Expr::one(), Expr::zero(), Expr::zero()])
                .unwrap();
        assert!(!jacobian_nonsingular(&k, &mut s).unwrap().nonsingular);
    }
}
