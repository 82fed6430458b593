//! End-to-end tests of the `tol` binary. Expected outputs live in
//! `tests/golden`; run with `TOL_BLESS=1` to rewrite them.

use std::path::{Path, PathBuf};
use std::process::Command;

use tol::semantics::Report;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn tol(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_tol"))
        .args(args)
        .current_dir(root())
        .env_remove("TOL_CONFIG")
        .output()
        .expect("binary runs");
    let text = |b: Vec<u8>| String::from_utf8(b).expect("utf-8 output");
    (out.status.code().expect("exit code"), text(out.stdout), text(out.stderr))
}

fn golden(name: &str, args: &[&str], code: i32) {
    let (got_code, stdout, stderr) = tol(args);
    assert_eq!(got_code, code, "{name}: {stderr}");
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.txt"));
    if std::env::var_os("TOL_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &stdout).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(stdout, want, "{name} differs from {}", path.display());
}

const RUNS: [(&str, &[&str]); 10] = [
    ("run-geometric", &["run", "corpus/geometric.prog", "--semiring", "prob", "--k", "40"]),
    ("run-counter", &["run", "corpus/counter.prog", "--k", "100"]),
    ("run-nt", &["run", "corpus/nt.prog"]),
    ("run-mallocdiv", &["run", "corpus/mallocdiv.prog"]),
    ("run-tortoise", &["run", "corpus/tortoise.prog", "--semiring", "prob", "--k", "50"]),
    ("run-countdown", &["run", "corpus/countdown.prog", "--init", "x=3"]),
    ("run-partition2", &["run", "corpus/partition2.prog", "--init", "n=2, A0=3, A1=0, pivot=2"]),
    ("run-partition3", &["run", "corpus/partition3.prog", "--init", "n=3, A0=2, A1=0, A2=1, pivot=1"]),
    ("run-partition4", &["run", "corpus/partition4.prog", "--init", "n=4, A0=3, A1=1, A2=2, A3=0, pivot=2"]),
    ("run-nt-json", &["--format", "json", "run", "corpus/nt.prog"]),
];

#[test]
fn corpus_runs_match_golden_output() {
    for (name, args) in RUNS {
        golden(name, args, 0);
    }
}

#[test]
fn corpus_proofs_match_golden_output() {
    for name in ["geometric", "counter", "nt", "mallocdiv", "tortoise", "countdown", "partition2", "partition3"] {
        let file = format!("corpus/{name}.proof");
        golden(&format!("proof-{name}"), &["check-proof", &file], 0);
    }
    golden("proof-nt-expanded", &["check-proof", "corpus/nt.proof", "--expand-derived"], 0);
}

#[test]
fn other_commands_match_golden_output() {
    golden("corpus-list", &["corpus", "list"], 0);
    golden(
        "transform-countdown",
        &["transform", "--kind", "wp", "--post", "x = 0", "--domain", "x:0..3", "--prog", "corpus/countdown.prog"],
        0,
    );
    golden(
        "triple-countdown",
        &[
            "check-triple",
            "--pre",
            "box(x = 1)",
            "--post",
            "box(x = 0)",
            "--prog",
            "corpus/countdown.prog",
            "--domain",
            "x:0..2",
        ],
        0,
    );
    golden("laws-bool", &["laws", "--semiring", "bool", "--seed", "1"], 0);
}

#[test]
fn exit_codes_are_stable() {
    let invalid = ["check-triple", "--pre", "box(x = 1)", "--post", "box(x = 1)", "--prog", "corpus/countdown.prog"];
    assert_eq!(tol(&[&invalid[..], &["--domain", "x:0..2"]].concat()).0, 1);
    assert_eq!(tol(&["run", "corpus/missing.prog"]).0, 2);
    assert_eq!(tol(&["run", "corpus/nt.prog", "--semiring", "reals"]).0, 2);
    assert_eq!(tol(&["run", "corpus/nt.prog", "--k", "0"]).0, 2);
    assert_eq!(tol(&["frobnicate"]).0, 2);
    assert_eq!(tol(&["--help"]).0, 0);

    let dir = tempfile::tempdir().unwrap();
    let prog = dir.path().join("twice.prog");
    std::fs::write(&prog, "vars x\nskip + skip\n").unwrap();
    let (code, _, err) = tol(&["run", prog.to_str().unwrap(), "--semiring", "prob"]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("overflow"), "{err}");

    let bad = dir.path().join("bad.proof");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(tol(&["check-proof", bad.to_str().unwrap()]).0, 2);
}

#[test]
fn rejected_proofs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(root().join("corpus/nt.proof")).unwrap();
    let broken = text.replace("(x + y = 3)", "(x + y = 4)");
    assert_ne!(text, broken);
    let path = dir.path().join("nt.proof");
    std::fs::write(&path, broken).unwrap();
    std::fs::copy(root().join("corpus/nt.prog"), dir.path().join("nt.prog")).unwrap();
    let (code, out, _) = tol(&["check-proof", path.to_str().unwrap()]);
    assert_eq!(code, 1, "{out}");
    assert!(out.starts_with("rejected"), "{out}");
}

#[test]
fn json_reports_round_trip() {
    for (name, args) in RUNS.iter().filter(|(_, a)| a[0] != "--format") {
        let args = [&["--format", "json"], *args].concat();
        let (code, out, err) = tol(&args);
        assert_eq!(code, 0, "{name}: {err}");
        let report: Report = serde_json::from_str(&out).unwrap_or_else(|e| panic!("{name}: {e}"));
        let again = serde_json::to_string_pretty(&report).unwrap();
        assert_eq!(again.trim_end(), out.trim_end(), "{name}");
        assert_eq!(serde_json::from_str::<Report>(&again).unwrap(), report);
    }
}

#[test]
fn configuration_files_set_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tol.json");
    std::fs::write(&cfg, r#"{ "semiring": "prob", "unroll_limit": 40 }"#).unwrap();
    let with_file = tol(&["--config", cfg.to_str().unwrap(), "run", "corpus/geometric.prog"]);
    let with_flags = tol(&["run", "corpus/geometric.prog", "--semiring", "prob", "--k", "40"]);
    assert_eq!(with_file, with_flags);

    let out = Command::new(env!("CARGO_BIN_EXE_tol"))
        .args(["run", "corpus/geometric.prog"])
        .current_dir(root())
        .env("TOL_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), with_flags.1);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{ "semirings": "prob" }"#).unwrap();
    assert_eq!(tol(&["--config", bad.to_str().unwrap(), "run", "corpus/nt.prog"]).0, 2);
}
