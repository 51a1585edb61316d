//! Acceptance suite: one PASS/FAIL line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use lielin::codes::{decompose, Code};
use lielin::corpus::{list_fixtures, load_fixture, run_corpus, Fixture, FixtureReport, RunConfig};
use lielin::expr::{Binding, DEFAULT_SEED};
use lielin::lie::{check_linearizable, complex_conditions, consistency_residual, Verdict};
use lielin::report::AnnotationKind;
use lielin::symmetry::{bracket, is_symmetry, TheoremCase};
use lielin::transform::{
    case6_canonical_transform, realify_transformation, same_real_transformation,
    verify_pde_linearization, RealPointTransformation, StageKind, VerificationReport,
};
use lielin::{equiv_zero, realify, Expr, Sampler};
use num_complex::Complex64;

struct Check {
    ok: bool,
    notes: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check {
            ok: true,
            notes: Vec::new(),
        }
    }

    fn expect(&mut self, cond: bool, what: impl Into<String>) {
        if !cond {
            self.ok = false;
            self.notes.push(format!("failed: {}", what.into()));
        }
    }

    fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }
}

fn report<'a>(reports: &'a [FixtureReport], name: &str) -> &'a FixtureReport {
    reports
        .iter()
        .find(|r| r.name == name)
        .expect("fixture ran")
}

fn stage_max(r: &VerificationReport, k: StageKind) -> f64 {
    r.stage(k).map(|s| s.max_residual).unwrap_or(f64::INFINITY)
}

fn stage_ok(r: &VerificationReport, k: StageKind, limit: f64) -> bool {
    r.stage(k)
        .is_some_and(|s| s.skipped.is_none() && s.samples > 0 && s.max_residual < limit)
}

fn sampler() -> Sampler {
    Sampler::with_seed(DEFAULT_SEED)
}

fn criterion_1() -> Check {
    let mut c = Check::new();
    let f = load_fixture("RICATTI").unwrap();
    let s = &f.stages[0];
    let fam = s.family.as_ref().unwrap();
    let cfg = RunConfig::default();
    let start = Instant::now();
    let rep = verify_pde_linearization(
        &decompose(&f.code),
        &realify_transformation(&s.composite),
        Some(&s.composite),
        &decompose(&s.target),
        fam,
        cfg.grid,
        1e-10,
    )
    .unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let src = stage_max(&rep, StageKind::SourceResidual);
    let tgt = stage_max(&rep, StageKind::TargetPdeResidual)
        .max(stage_max(&rep, StageKind::TargetPdeChainRule));
    let n = rep
        .stage(StageKind::SourceResidual)
        .map_or(0, |s| s.samples);
    c.expect(src < 1e-10, format!("source residual {src:e}"));
    c.expect(tgt < 1e-10, format!("target residual {tgt:e}"));
    c.expect(n > 600, format!("only {n} grid points"));
    c.expect(rep.passed(), "verification report");
    c.expect(elapsed < 1.0, format!("runtime {elapsed:.3}s"));
    c.note(format!(
        "source {src:.1e}, target {tgt:.1e}, {n} points, {elapsed:.3}s"
    ));
    c
}

fn criterion_2(reports: &[FixtureReport]) -> Check {
    let mut c = Check::new();
    let r = report(reports, "SHO");
    let st = &r.stages[0];
    let src = stage_max(&st.pde, StageKind::SourceResidual);
    let tgt = stage_max(&st.pde, StageKind::TargetPdeResidual)
        .max(stage_max(&st.pde, StageKind::TargetPdeChainRule));
    c.expect(st.ode.passed() && st.pde.passed(), "SHO verification");
    c.expect(
        src < 1e-9 && tgt < 1e-9,
        format!("residuals {src:e}, {tgt:e}"),
    );

    let f = load_fixture("SHO").unwrap();
    let printed = f.stages[0].printed_transformation.as_ref().unwrap();
    let z = Expr::var("z");
    let (x, y) = realify(&Expr::apply(lielin::Func::Tan, z)).unwrap();
    for (name, a, b) in [("X", &x, &printed.big_x), ("Y", &y, &printed.big_y)] {
        let t = equiv_zero(&(a - b), &mut sampler(), 1e-9).unwrap();
        c.expect(
            t.is_zero,
            format!("realified tan z differs from printed {name}"),
        );
    }
    let g_typo = r
        .annotations
        .iter()
        .any(|a| a.kind == AnnotationKind::Typo && a.printed.contains("G = "));
    c.expect(g_typo, "printed G mismatch annotated");
    c.note(format!(
        "source {src:.1e}, target {tgt:.1e}, tan z components match, G mismatch annotated"
    ));
    c
}

fn criterion_3(reports: &[FixtureReport]) -> Check {
    let mut c = Check::new();
    let r = report(reports, "EX1");
    c.expect(r.lie.verdict == Verdict::Linearizable, "EX1 lie verdict");
    let case = r.classification.as_ref().map(|k| k.case);
    c.expect(
        case == Some(TheoremCase::Case6),
        format!("EX1 case {case:?}"),
    );

    let f = load_fixture("EX1").unwrap();
    let first = realify_transformation(&f.stages[0].transformation);
    let [x1, y1, f1, g1] = first.components();
    let c6 = case6_canonical_transform(-1.0, 0.0, 6.0, 0.0).unwrap();
    let chain = c6
        .components()
        .map(|e| e.subs(&[("x", x1), ("y", y1), ("f", f1), ("g", g1)]));
    let rt = RealPointTransformation::new(chain).unwrap();
    let printed = f.stages[1].printed_transformation.as_ref().unwrap();
    let tests = same_real_transformation(&rt, printed, &mut sampler(), 1e-9).unwrap();
    c.expect(
        tests.iter().all(|t| t.is_zero),
        "case-6 map against the printed map",
    );

    let composite = &f.stages[1].composite;
    let pc = f.stages[1].printed_complex.as_ref().unwrap();
    for (a, b) in [(&composite.big_z, &pc.big_z), (&composite.big_u, &pc.big_u)] {
        c.expect(
            equiv_zero(&(a - b), &mut sampler(), 1e-9).unwrap().is_zero,
            "composite chain",
        );
    }
    let last = &r.stages[1].pde;
    let res = stage_max(last, StageKind::TargetPdeResidual)
        .max(stage_max(last, StageKind::TargetPdeChainRule));
    c.expect(
        last.passed() && res < 1e-9,
        format!("final system residual {res:e}"),
    );
    c.note(format!(
        "case 6, map components match, final residual {res:.1e}"
    ));
    c
}

fn criterion_4(reports: &[FixtureReport]) -> Check {
    let mut c = Check::new();
    let mut worst = [0.0f64; 3];
    for name in ["EX2_W0", "EX2_WCONST", "EX3", "EX4_W0", "EX4_WCONST"] {
        let r = report(reports, name);
        c.expect(
            r.lie.verdict == Verdict::Linearizable,
            format!("{name} lie verdict"),
        );
        for st in &r.stages {
            let ode = stage_max(&st.ode, StageKind::TargetOdeResidual);
            let pde = stage_max(&st.pde, StageKind::TargetPdeResidual)
                .max(stage_max(&st.pde, StageKind::TargetPdeChainRule));
            c.expect(
                stage_ok(&st.ode, StageKind::TargetOdeResidual, 1e-9),
                format!("{name} ODE {ode:e}"),
            );
            c.expect(
                stage_ok(&st.pde, StageKind::TargetPdeResidual, 1e-9)
                    && stage_ok(&st.pde, StageKind::TargetPdeChainRule, 1e-9),
                format!("{name} PDE {pde:e}"),
            );
            worst[0] = worst[0].max(ode);
            worst[1] = worst[1].max(pde);
            match st.pde.stage(StageKind::FdOracleResidual) {
                Some(s) if s.skipped.is_none() => {
                    c.expect(
                        s.passed && s.max_residual < 1e-4,
                        format!("{name} FD {:e}", s.max_residual),
                    );
                    worst[2] = worst[2].max(s.max_residual);
                }
                _ => c.note(format!("{name}: no inverse curve, FD skipped")),
            }
        }
    }
    c.note(format!(
        "worst ODE {:.1e}, PDE {:.1e}, FD {:.1e}",
        worst[0], worst[1], worst[2]
    ));
    c
}

fn criterion_5() -> Check {
    let mut c = Check::new();
    let f = load_fixture("NONLIN_UUP").unwrap();
    let rep = check_linearizable(&f.code, &mut sampler(), 1e-9).unwrap();
    c.expect(
        rep.verdict == Verdict::NotLinearizable,
        format!("verdict {:?}", rep.verdict),
    );
    let cubic = f.code.to_cubic().unwrap();
    let (_, ii) = complex_conditions(&cubic);
    let two_u = Expr::real(2.0) * Expr::var("u");
    let mut s = sampler();
    let mut worst = 0.0f64;
    let pts = s
        .draw_for(&ii, &["z".into(), "u".into(), "up".into()])
        .unwrap();
    for b in &pts {
        let v = ii.eval::<f64>(b).unwrap();
        let w = two_u.eval::<f64>(b).unwrap();
        worst = worst.max((v - w).norm() / w.norm());
    }
    c.expect(
        worst <= 1e-12,
        format!("condition II vs 2u relative {worst:e}"),
    );
    c.note(format!("{} samples, worst relative {worst:.1e}", pts.len()));
    c
}

fn criterion_6(fixtures: &[Fixture], reports: &[FixtureReport]) -> Check {
    let mut c = Check::new();
    let mut worst = 0.0f64;
    for f in fixtures {
        let r = report(reports, &f.name);
        if let Code::First(_) = f.code {
            c.note(format!("{}: first order, conditions vacuous", f.name));
            continue;
        }
        let cubic = f.code.to_cubic().unwrap();
        let d = consistency_residual(&cubic, &mut sampler()).unwrap();
        worst = worst.max(d);
        c.expect(d <= 1e-12, format!("{} consistency {d:e}", f.name));
        c.expect(
            r.lie.complex_verdict == r.lie.real_verdict,
            format!("{} verdicts disagree", f.name),
        );
    }
    c.note(format!("worst relative {worst:.1e}"));
    c
}

fn criterion_7(reports: &[FixtureReport]) -> Check {
    let mut c = Check::new();
    for name in ["EX1", "EX2_W0", "EX3", "EX4_W0"] {
        let f = load_fixture(name).unwrap();
        for (i, z) in f.symmetries.iter().enumerate() {
            let t = is_symmetry(z, &f.code, &mut sampler().fork(i as u64), 1e-9).unwrap();
            c.expect(
                t.is_zero,
                format!("{name} field {} residual {:e}", i + 1, t.max_relative),
            );
        }
    }
    let ex1 = load_fixture("EX1").unwrap();
    let br = bracket(&ex1.symmetries[0], &ex1.symmetries[1]);
    let z1 = &ex1.symmetries[0];
    let same = equiv_zero(&(&br.xi - &z1.xi), &mut sampler(), 1e-9)
        .unwrap()
        .is_zero
        && equiv_zero(&(&br.eta - &z1.eta), &mut sampler(), 1e-9)
            .unwrap()
            .is_zero;
    c.expect(same, "EX1 bracket equals Z1");
    let ex2 = load_fixture("EX2_W0").unwrap();
    let br = bracket(&ex2.symmetries[0], &ex2.symmetries[1]);
    let zero = equiv_zero(&br.xi, &mut sampler(), 1e-9).unwrap().is_zero
        && equiv_zero(&br.eta, &mut sampler(), 1e-9).unwrap().is_zero;
    c.expect(zero, "EX2 bracket vanishes");

    let mut ratios = Vec::new();
    let mut exact = 0;
    for r in reports {
        for s in &r.symmetries {
            if let Some(fl) = &s.flow {
                c.expect(
                    fl.is_symmetry,
                    format!("{} field {} flow", r.name, s.index + 1),
                );
                c.expect(
                    fl.epsilons == [1e-3, 5e-4],
                    format!("{} epsilons {:?}", r.name, fl.epsilons),
                );
                match fl.ratio {
                    Some(q) => {
                        c.expect(
                            (q - 4.0).abs() <= 0.8,
                            format!("{} field {} ratio {q}", r.name, s.index + 1),
                        );
                        ratios.push(q);
                    }
                    None => {
                        c.expect(
                            fl.exact,
                            format!("{} field {} has no ratio", r.name, s.index + 1),
                        );
                        exact += 1;
                    }
                }
            }
        }
    }
    c.expect(!ratios.is_empty(), "no flow ratios measured");
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &q| (a.min(q), b.max(q)));
    c.note(format!(
        "{} flow ratios in [{lo:.3}, {hi:.3}], {exact} exact flows",
        ratios.len()
    ));
    c
}

/// Central difference of `e` in `sym` at `b`.
fn central(e: &Expr, b: &Binding, sym: &str) -> Option<Complex64> {
    let v = b.get(sym)?;
    let h = 1e-5;
    let at = |s: f64| {
        let mut c = b.clone();
        c.set(sym, v + Complex64::new(s * h, 0.0));
        e.eval::<f64>(&c).ok()
    };
    Some((at(1.0)? - at(-1.0)?) / (2.0 * h))
}

fn corpus_expressions(f: &Fixture) -> Vec<(String, Expr)> {
    let mut out = vec![("rhs".to_string(), f.code.rhs())];
    for (i, z) in f.symmetries.iter().enumerate() {
        out.push((format!("xi{}", i + 1), z.xi.clone()));
        out.push((format!("eta{}", i + 1), z.eta.clone()));
    }
    for (i, s) in f.stages.iter().enumerate() {
        out.push((format!("stage {} Z", i + 1), s.transformation.big_z.clone()));
        out.push((format!("stage {} U", i + 1), s.transformation.big_u.clone()));
        let rt = realify_transformation(&s.composite);
        for (n, e) in ["X", "Y", "F", "G"].iter().zip(rt.components()) {
            out.push((format!("stage {} {n}", i + 1), e.clone()));
        }
    }
    out
}

fn criterion_8(fixtures: &[Fixture], reports: &[FixtureReport]) -> Check {
    let mut c = Check::new();
    let mut worst = 0.0f64;
    let mut count = 0;
    let base = Sampler::new(
        lielin::SamplerConfig::default()
            .with_seed(DEFAULT_SEED)
            .with_samples(100),
    );
    for f in fixtures {
        for (k, (label, e)) in corpus_expressions(f).into_iter().enumerate() {
            let vars: Vec<String> = e.free_vars().into_iter().collect();
            if vars.is_empty() {
                continue;
            }
            let pts = base.fork(k as u64).draw_for(&e, &vars).unwrap();
            c.expect(
                pts.len() == 100,
                format!("{} {label}: {} samples", f.name, pts.len()),
            );
            for sym in &vars {
                let d = e.diff(sym);
                for b in &pts {
                    let (Ok(dv), Some(fd)) = (d.eval::<f64>(b), central(&e, b, sym)) else {
                        c.expect(false, format!("{} {label}: d/d{sym} not evaluable", f.name));
                        continue;
                    };
                    let rel = (dv - fd).norm() / dv.norm().max(1.0);
                    worst = worst.max(rel);
                    count += 1;
                    c.expect(
                        rel < 1e-4,
                        format!("{} {label}: d/d{sym} relative {rel:e}", f.name),
                    );
                }
            }
        }
        if let Some(fam) = &f.family {
            let up = fam.up();
            let pts = fam.draw(&base, &[&fam.u], 100).unwrap();
            for b in &pts {
                let (Ok(dv), Some(fd)) = (up.eval::<f64>(b), central(&fam.u, b, "z")) else {
                    continue;
                };
                let rel = (dv - fd).norm() / dv.norm().max(1.0);
                worst = worst.max(rel);
                count += 1;
                c.expect(
                    rel < 1e-4,
                    format!("{} family u': relative {rel:e}", f.name),
                );
            }
        }
    }
    let mut min_det = f64::INFINITY;
    for r in reports {
        for st in &r.stages {
            match st
                .pde
                .stage(StageKind::Jacobian)
                .and_then(|s| s.min_abs_det)
            {
                Some(d) => min_det = min_det.min(d),
                None => c.expect(
                    false,
                    format!("{} stage {}: no Jacobian check", r.name, st.index + 1),
                ),
            }
        }
    }
    c.expect(min_det > 1e-6, format!("min |det| {min_det:e}"));
    c.dedupe();
    c.note(format!(
        "{count} derivative samples, worst relative {worst:.1e}; min |det| {min_det:.1e}"
    ));
    c
}

impl Check {
    /// Keeps the first few failure lines.
    fn dedupe(&mut self) {
        if self.notes.len() > 5 {
            let extra = self.notes.len() - 5;
            self.notes.truncate(5);
            self.notes.push(format!("... {extra} more"));
        }
    }
}

fn criterion_9() -> Check {
    let mut c = Check::new();
    let cfg = RunConfig::default();
    let names = list_fixtures();
    let render = || -> String {
        run_corpus(&names, &cfg)
            .unwrap()
            .iter()
            .flat_map(FixtureReport::json_lines)
            .collect::<Vec<_>>()
            .join("\n")
    };
    let a = render();
    let b = render();
    c.expect(a == b, "json-lines differ between runs");
    c.note(format!(
        "{} lines, {} bytes, identical",
        a.lines().count(),
        a.len()
    ));
    c
}

fn main() -> ExitCode {
    let cfg = RunConfig::default();
    let names = list_fixtures();
    let fixtures: Vec<Fixture> = names.iter().map(|n| load_fixture(n).unwrap()).collect();
    let reports = run_corpus(&names, &cfg).unwrap();

    let results = [
        ("Riccati pipeline", criterion_1()),
        ("oscillator pipeline", criterion_2(&reports)),
        ("example 1 end to end", criterion_3(&reports)),
        ("examples 2, 3, 4", criterion_4(&reports)),
        ("negative control", criterion_5()),
        ("condition consistency", criterion_6(&fixtures, &reports)),
        ("symmetry suite", criterion_7(&reports)),
        ("numerics guardrails", criterion_8(&fixtures, &reports)),
        ("determinism", criterion_9()),
    ];
    let mut all = true;
    for (i, (title, c)) in results.iter().enumerate() {
        all &= c.ok;
        println!(
            "criterion {} ({title}): {}",
            i + 1,
            if c.ok { "PASS" } else { "FAIL" }
        );
        for n in &c.notes {
            println!("    {n}");
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
