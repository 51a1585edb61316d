use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use tempfile::TempDir;

fn lielin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lielin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

struct Files(TempDir);

impl Files {
    fn new() -> Self {
        Files(tempfile::tempdir().unwrap())
    }

    fn put(&self, name: &str, body: &str) -> String {
        let p: PathBuf = self.0.path().join(name);
        fs::write(&p, body).unwrap();
        p.to_string_lossy().into_owned()
    }
}

const RICCATI: &str = r#"{"order": 1, "form": "first", "w": "-u^2"}"#;
const ZERO: &str = r#"{"order": 2, "form": "cubic"}"#;
const UUP: &str = r#"{"order": 2, "form": "cubic", "C": "u"}"#;

// decompose

#[test]
fn decompose_riccati_file() {
    let f = Files::new();
    let out = lielin(&["decompose", &f.put("r.json", RICCATI)]);
    assert_eq!(code(&out), 0);
    let s = stdout(&out);
    assert!(s.contains("order 1, weight 0.5"), "{s}");
    assert!(
        s.contains("= -(f^2 - g^2)") || s.contains("= -f^2 + g^2"),
        "{s}"
    );
    assert!(s.contains("= -2*f*g"), "{s}");
}

#[test]
fn decompose_zero_code() {
    let f = Files::new();
    let out = lielin(&["decompose", &f.put("z.json", ZERO), "--output", "jsonl"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["rhs_re"], "0");
    assert_eq!(v["rhs_im"], "0");
    assert_eq!(v["weight"], 0.25);
}

#[test]
fn decompose_fixture_code() {
    let out = lielin(&["decompose", "--case", "EX1"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("order 2, weight 0.25"));
}

#[test]
fn decompose_bad_input() {
    let f = Files::new();
    assert_eq!(
        code(&lielin(&[
            "decompose",
            &f.put("b.json", r#"{"order": 2, "form": "cubic", "A": "u +"}"#)
        ])),
        2
    );
    assert_eq!(
        code(&lielin(&["decompose", &f.put("n.json", "not json")])),
        2
    );
    assert_eq!(code(&lielin(&["decompose", "/nonexistent/file.json"])), 2);
    assert_eq!(code(&lielin(&["decompose"])), 2);
    assert_eq!(code(&lielin(&["decompose", "--case", "EX9"])), 2);
}

// check

#[test]
fn check_exit_codes() {
    let f = Files::new();
    assert_eq!(code(&lielin(&["check", "--case", "EX1"])), 0);
    assert_eq!(code(&lielin(&["check", "--case", "NONLIN_UUP"])), 3);
    assert_eq!(code(&lielin(&["check", &f.put("u.json", UUP)])), 3);
    assert_eq!(code(&lielin(&["check", &f.put("z.json", ZERO)])), 0);
    assert_eq!(code(&lielin(&["check", &f.put("r.json", RICCATI)])), 0);
}

#[test]
fn check_inconclusive() {
    // Condition II is 2e-6 u: clearly nonzero on too few samples at this tolerance
    let f = Files::new();
    let p = f.put("c.json", r#"{"order": 2, "form": "cubic", "C": "0.001*u"}"#);
    assert_eq!(code(&lielin(&["check", &p, "--tol", "0.000001"])), 4);
    assert_eq!(code(&lielin(&["check", &p])), 3);
}

#[test]
fn check_input_errors() {
    let f = Files::new();
    assert_eq!(
        code(&lielin(&[
            "check",
            &f.put("b.json", r#"{"order": 3, "form": "cubic"}"#)
        ])),
        2
    );
    assert_eq!(code(&lielin(&["check", "--case", "EX1", "--bogus"])), 2);
    assert_eq!(
        code(&lielin(&["check", "--case", "EX1", "--samples", "many"])),
        2
    );
}

// classify

const EX1_Z1: &str = r#"{"xi": "1", "eta": "0"}"#;
const EX1_Z2: &str = r#"{"xi": "z", "eta": "-u"}"#;

#[test]
fn classify_files() {
    let f = Files::new();
    let (a, b) = (f.put("a.json", EX1_Z1), f.put("b.json", EX1_Z2));
    let out = lielin(&["classify", &a, &b]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("case 6"), "{}", stdout(&out));
}

#[test]
fn classify_with_code_rejects_non_symmetry() {
    let f = Files::new();
    let a = f.put("a.json", EX1_Z1);
    let bad = f.put("b.json", r#"{"xi": "z^2", "eta": "u^3"}"#);
    let c = f.put("c.json", RICCATI);
    assert_eq!(code(&lielin(&["classify", &a, &bad, "--code", &c])), 5);
}

#[test]
fn classify_fixtures() {
    let out = lielin(&["classify", "--case", "EX1"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("case 6"));

    let out = lielin(&["classify", "--case", "EX2_W0"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("case 3"));
    assert!(stdout(&out).contains("rho = z"));

    let out = lielin(&["classify", "--case", "EX4_W0"]);
    assert_eq!(code(&out), 0);
    let s = stdout(&out);
    assert!(s.starts_with("case 4"), "{s}");
    assert!(s.contains("[classification-discrepancy]"), "{s}");
}

#[test]
fn classify_input_errors() {
    let f = Files::new();
    let a = f.put("a.json", EX1_Z1);
    let real = f.put("r.json", r#"{"x": "1", "y": "0", "f": "0", "g": "0"}"#);
    assert_eq!(code(&lielin(&["classify", &a])), 2);
    assert_eq!(code(&lielin(&["classify", &a, &real])), 2);
    assert_eq!(
        code(&lielin(&[
            "classify",
            &a,
            &f.put("b.json", r#"{"xi": "(z", "eta": "0"}"#)
        ])),
        2
    );
    // only one symmetry on file
    assert_eq!(code(&lielin(&["classify", "--case", "RICATTI"])), 2);
}

// verify

#[test]
fn verify_fixtures() {
    assert_eq!(code(&lielin(&["verify", "RICATTI"])), 0);
    assert_eq!(code(&lielin(&["verify", "EX1"])), 0);
    let out = lielin(&["verify", "NONLIN_UUP"]);
    assert_eq!(code(&out), 6);
    assert!(stdout(&out).contains("NotLinearizable"));
    assert_eq!(code(&lielin(&["verify", "EX9"])), 2);
}

#[test]
fn verify_from_files() {
    let f = Files::new();
    let src = f.put("s.json", RICCATI);
    let tgt = f.put("t.json", r#"{"order": 1, "form": "first", "w": "0"}"#);
    let fam = f.put(
        "f.json",
        r#"{"u": "1/(z + c)", "parameters": {"c": [-1, 1]},
            "exclusions": [{"kind": "min_abs", "expr": "z + c", "min": 0.2}],
            "region": {"re": [-2, 2], "im": [-2, 2]}, "z_of_Z": "Z"}"#,
    );
    let good = f.put("g.json", r#"{"Z": "z", "U": "1/u - z"}"#);
    let bad = f.put("b.json", r#"{"Z": "z", "U": "2/u - z"}"#);
    let out = lielin(&[
        "verify",
        "--code",
        &src,
        "--transform",
        &good,
        "--target",
        &tgt,
        "--family",
        &fam,
    ]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let out = lielin(&[
        "verify",
        "--code",
        &src,
        "--transform",
        &bad,
        "--target",
        &tgt,
        "--family",
        &fam,
    ]);
    assert_eq!(code(&out), 6, "{}", stdout(&out));
    // incomplete file set
    assert_eq!(code(&lielin(&["verify", "--code", &src])), 2);
}

// corpus

#[test]
fn corpus_single_case() {
    let out = lielin(&["corpus", "--case", "EX3"]);
    assert_eq!(code(&out), 0);
    let s = stdout(&out);
    let rows: Vec<&str> = s.lines().filter(|l| l.starts_with("EX")).collect();
    assert_eq!(rows.len(), 1, "{s}");
    assert!(rows[0].ends_with("PASS"));
}

#[test]
fn corpus_unknown_case() {
    assert_eq!(code(&lielin(&["corpus", "--case", "EX9"])), 2);
    assert_eq!(
        code(&lielin(&["corpus", "--case", "EX3", "--case", "NOPE"])),
        2
    );
}

#[test]
fn corpus_bad_grid() {
    assert_eq!(code(&lielin(&["corpus", "--grid", "12"])), 2);
    assert_eq!(code(&lielin(&["corpus", "--grid", "0x4"])), 2);
    assert_eq!(code(&lielin(&["corpus", "--output", "xml"])), 2);
}

#[test]
fn corpus_jsonl_is_deterministic() {
    let args = [
        "corpus", "--case", "RICATTI", "--case", "EX3", "--output", "jsonl", "--seed", "7",
    ];
    let a = lielin(&args);
    let b = lielin(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    for line in stdout(&a).lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
    let last: serde_json::Value = serde_json::from_str(stdout(&a).lines().last().unwrap()).unwrap();
    assert_eq!(last["kind"], "corpus-summary");
    assert_eq!(last["fixtures"], 2);
}

#[test]
fn corpus_export_and_reload() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_string_lossy().into_owned();
    assert_eq!(code(&lielin(&["corpus", "--export", &d])), 0);
    let out = lielin(&["corpus", "--dir", &d, "--case", "RICATTI"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(code(&lielin(&["corpus", "--dir", &d, "--case", "NOPE"])), 2);
}
