use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use lielin::codes::{decompose, load_code, Code, RealPdeSystem};
use lielin::corpus::{self, CorpusSummary, FixtureReport, RunConfig};
use lielin::lie::{check_linearizable, Verdict};
use lielin::report::Report;
use lielin::symmetry::{
    classify_theorem_case, is_symmetry, load_field, ComplexVectorField, Field, TheoremCase,
};
use lielin::transform::{
    load_transformation, realify_transformation, verify_ode_linearization,
    verify_pde_linearization, GridSpec, SolutionFamily, Transformation, VerificationReport,
};

const EXIT_INPUT: u8 = 2;
const EXIT_NOT_LINEARIZABLE: u8 = 3;
const EXIT_INCONCLUSIVE: u8 = 4;
const EXIT_NOT_SYMMETRY: u8 = 5;
const EXIT_VERIFY: u8 = 6;

#[derive(Parser, Debug)]
#[command(
    name = "lielin",
    version,
    about = "Linearization checks for complex second-order ODEs"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Seed for every random sample.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Samples per zero test.
    #[arg(long, global = true, default_value_t = 32)]
    samples: usize,
    /// Zero-test tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Verification grid, cells along x and y.
    #[arg(long, global = true, default_value = "12x12")]
    grid: Grid,
    #[arg(long, global = true, value_enum, default_value_t = Output::Text)]
    output: Output,
    /// More detail in text output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Clone, Copy, Debug)]
struct Grid(usize, usize);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("grid `{s}` is not AxB"))?;
        let n = |t: &str| match t.trim().parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(format!("grid `{s}` needs positive sizes")),
        };
        Ok(Grid(n(a)?, n(b)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Output {
    Text,
    Jsonl,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the real PDE system of a complex ODE.
    Decompose(Source),
    /// Run the linearizability conditions.
    Check(Source),
    /// Classify a pair of complex symmetries.
    Classify {
        /// Two field files.
        fields: Vec<PathBuf>,
        /// Code the fields must be symmetries of.
        #[arg(long)]
        code: Option<PathBuf>,
        /// Use the fixture's symmetries, code and stated case.
        #[arg(long = "case")]
        case: Option<String>,
    },
    /// Verify a fixture, or a transformation given as files.
    Verify {
        /// Fixture name.
        name: Option<String>,
        #[arg(long, requires_all = ["transform", "target", "family"])]
        code: Option<PathBuf>,
        #[arg(long)]
        transform: Option<PathBuf>,
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long)]
        family: Option<PathBuf>,
    },
    /// Run fixtures and print a summary table.
    Corpus {
        /// Restrict to these fixtures.
        #[arg(long = "case")]
        cases: Vec<String>,
        /// Load fixtures from a directory instead of the built-in set.
        #[arg(long)]
        dir: Option<PathBuf>,
        /// Write the built-in fixtures to a directory and exit.
        #[arg(long)]
        export: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Source {
    /// Code file.
    file: Option<PathBuf>,
    /// Use a built-in fixture's code.
    #[arg(long = "case", conflicts_with = "file")]
    case: Option<String>,
}

struct Failure(u8, String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(EXIT_INPUT, e.to_string())
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    let g = &cli.global;
    let cfg = RunConfig {
        seed: g.seed,
        samples: g.samples,
        tol: g.tol,
        grid: GridSpec {
            nx: g.grid.0,
            ny: g.grid.1,
            ..GridSpec::default()
        },
        ..RunConfig::default()
    };
    if g.verbose > 0 && g.output == Output::Text {
        eprintln!(
            "seed {} samples {} tol {:e} grid {}x{}",
            cfg.seed, cfg.samples, cfg.tol, cfg.grid.nx, cfg.grid.ny
        );
    }
    match &cli.command {
        Command::Decompose(src) => cmd_decompose(&load_source(src)?, g.output),
        Command::Check(src) => cmd_check(&load_source(src)?, &cfg, g.output),
        Command::Classify { fields, code, case } => {
            cmd_classify(fields, code.as_deref(), case.as_deref(), &cfg, g.output)
        }
        Command::Verify {
            name,
            code,
            transform,
            target,
            family,
        } => match (name, code, transform, target, family) {
            (Some(n), None, None, None, None) => cmd_verify_fixture(n, &cfg, g.output),
            (None, Some(c), Some(t), Some(w), Some(f)) => {
                cmd_verify_files(c, t, w, f, &cfg, g.output)
            }
            _ => Err(Failure(
                EXIT_INPUT,
                "verify takes a fixture name or --code, --transform, --target and --family".into(),
            )),
        },
        Command::Corpus { cases, dir, export } => match export {
            Some(d) => {
                corpus::export_fixtures(d)?;
                Ok(0)
            }
            None => cmd_corpus(cases, dir.as_deref(), &cfg, g),
        },
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn load_source(src: &Source) -> Result<Code, Failure> {
    match (&src.file, &src.case) {
        (Some(p), None) => Ok(load_code(&read(p)?)?),
        (None, Some(n)) => Ok(corpus::load_fixture(n)?.code),
        _ => Err(Failure(
            EXIT_INPUT,
            "give a code file or --case NAME".into(),
        )),
    }
}

fn emit(text: String, lines: Vec<String>, out: Output) {
    match out {
        Output::Text => print!("{text}"),
        Output::Jsonl => lines.iter().for_each(|l| println!("{l}")),
    }
}

fn system_text(sys: &RealPdeSystem) -> String {
    let (o1, o2) = sys.operator_text();
    format!(
        "order {}, weight {}\n  {} * ({o1}) = {}\n  {} * ({o2}) = {}\n",
        sys.order,
        sys.convention_weight,
        sys.convention_weight,
        sys.rhs_re,
        sys.convention_weight,
        sys.rhs_im
    )
}

fn cmd_decompose(code: &Code, out: Output) -> Outcome {
    let sys = decompose(code);
    let mut text = system_text(&sys);
    for a in &sys.annotations {
        text += &format!("  {a}\n");
    }
    let line = json!({
        "kind": "decomposition",
        "order": sys.order,
        "weight": sys.convention_weight,
        "rhs_re": sys.rhs_re.to_string(),
        "rhs_im": sys.rhs_im.to_string(),
        "annotations": sys.annotations,
    });
    emit(text, vec![line.to_string()], out);
    Ok(0)
}

fn cmd_check(code: &Code, cfg: &RunConfig, out: Output) -> Outcome {
    let rep = check_linearizable(code, &mut cfg.sampler().fork(1), cfg.tol)?;
    emit(rep.text(), rep.json_lines(), out);
    Ok(match rep.verdict {
        Verdict::Linearizable => 0,
        Verdict::NotLinearizable => EXIT_NOT_LINEARIZABLE,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    })
}

fn complex_field(path: &Path) -> Result<ComplexVectorField, Failure> {
    match load_field(&read(path)?)? {
        Field::Complex(z) => Ok(z),
        Field::Real(_) => Err(Failure(
            EXIT_INPUT,
            format!("{}: classification needs complex fields", path.display()),
        )),
    }
}

fn cmd_classify(
    fields: &[PathBuf],
    code: Option<&Path>,
    case: Option<&str>,
    cfg: &RunConfig,
    out: Output,
) -> Outcome {
    let (z, code, stated): (Vec<ComplexVectorField>, Option<Code>, Option<TheoremCase>) =
        match (case, fields) {
            (Some(n), []) => {
                let f = corpus::load_fixture(n)?;
                let code = match code {
                    Some(p) => load_code(&read(p)?)?,
                    None => f.code,
                };
                (f.symmetries, Some(code), f.stated_case)
            }
            (None, [a, b]) => (
                vec![complex_field(a)?, complex_field(b)?],
                code.map(|p| read(p).and_then(|s| Ok(load_code(&s)?)))
                    .transpose()?,
                None,
            ),
            _ => {
                return Err(Failure(
                    EXIT_INPUT,
                    "classify takes two field files or --case NAME".into(),
                ))
            }
        };
    let [z1, z2] = z.as_slice() else {
        return Err(Failure(
            EXIT_INPUT,
            format!("need two symmetries, found {}", z.len()),
        ));
    };
    let base = cfg.sampler();
    if let Some(code) = &code {
        for (i, zi) in [z1, z2].into_iter().enumerate() {
            let t = is_symmetry(zi, code, &mut base.fork(100 + i as u64), cfg.tol)?;
            if !t.is_zero {
                return Err(Failure(
                    EXIT_NOT_SYMMETRY,
                    format!(
                        "field {} is not a symmetry (max relative {:e})",
                        i + 1,
                        t.max_relative
                    ),
                ));
            }
        }
    }
    let c = classify_theorem_case(z1, z2, stated, &mut base.fork(130), cfg.tol)?;
    emit(c.text(), vec![c.json_line()], out);
    Ok(0)
}

fn cmd_verify_fixture(name: &str, cfg: &RunConfig, out: Output) -> Outcome {
    let rep = corpus::run_fixture(name, cfg)?;
    emit(rep.text(), rep.json_lines(), out);
    Ok(if rep.verified() { 0 } else { EXIT_VERIFY })
}

fn cmd_verify_files(
    code: &Path,
    transform: &Path,
    target: &Path,
    family: &Path,
    cfg: &RunConfig,
    out: Output,
) -> Outcome {
    let source = load_code(&read(code)?)?;
    let target = load_code(&read(target)?)?;
    let fam = SolutionFamily::from_json(&read(family)?)?;
    let sampler = cfg.sampler();
    let mut reports: Vec<VerificationReport> = Vec::new();
    let (rt, complex) = match load_transformation(&read(transform)?)? {
        Transformation::Complex(t) => {
            reports.push(verify_ode_linearization(
                &source, &t, &target, &fam, &sampler, cfg.tol,
            )?);
            (realify_transformation(&t), Some(t))
        }
        Transformation::Real(rt) => (rt, None),
    };
    reports.push(verify_pde_linearization(
        &decompose(&source),
        &rt,
        complex.as_ref(),
        &decompose(&target),
        &fam,
        cfg.grid,
        cfg.tol,
    )?);
    let text = reports.iter().map(Report::text).collect();
    let lines = reports
        .iter()
        .flat_map(VerificationReport::json_lines)
        .collect();
    emit(text, lines, out);
    Ok(if reports.iter().all(VerificationReport::passed) {
        0
    } else {
        EXIT_VERIFY
    })
}

fn cmd_corpus(cases: &[String], dir: Option<&Path>, cfg: &RunConfig, g: &Global) -> Outcome {
    let reports: Vec<FixtureReport> = match dir {
        Some(d) => {
            let mut all = corpus::load_fixture_dir(d)?;
            if !cases.is_empty() {
                if let Some(n) = cases.iter().find(|n| !all.iter().any(|f| &f.name == *n)) {
                    return Err(Failure(EXIT_INPUT, format!("unknown fixture `{n}`")));
                }
                all.retain(|f| cases.contains(&f.name));
            }
            all.iter()
                .map(|f| corpus::run(f, cfg))
                .collect::<Result<_, _>>()?
        }
        None => {
            let names: Vec<&str> = if cases.is_empty() {
                corpus::list_fixtures()
            } else {
                cases.iter().map(String::as_str).collect()
            };
            corpus::run_corpus(&names, cfg)?
        }
    };
    let summary = CorpusSummary { reports };
    let mut text = String::new();
    if g.verbose > 0 {
        for r in &summary.reports {
            text += &r.text();
            text += "\n";
        }
    }
    text += &summary.text();
    let mut lines: Vec<String> = summary
        .reports
        .iter()
        .flat_map(FixtureReport::json_lines)
        .collect();
    lines.push(summary.json_line());
    emit(text, lines, g.output);
    Ok(if summary.all_passed() { 0 } else { EXIT_VERIFY })
}
