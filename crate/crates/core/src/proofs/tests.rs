use std::path::PathBuf;

use super::*;

fn corpus(name: &str) -> Proof {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name);
    Proof::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn report(name: &str) -> CheckReport {
    let r = check_proof(&corpus(name), &CheckConfig::default());
    eprintln!("{name}:\n{r}");
    r
}

#[test]
fn geometric_is_accepted_without_obligations() {
    let r = report("geometric.proof");
    assert!(r.is_clean(), "{r}");
}

#[test]
fn counter_is_accepted_without_obligations() {
    let r = report("counter.proof");
    assert!(r.is_clean(), "{r}");
}

#[test]
fn nt_is_accepted() {
    let r = report("nt.proof");
    assert!(r.is_accepted(), "{r}");
}

#[test]
fn mallocdiv_is_accepted() {
    let r = report("mallocdiv.proof");
    assert!(r.is_accepted(), "{r}");
}

#[test]
fn countdown_is_accepted() {
    let r = report("countdown.proof");
    assert!(r.is_accepted(), "{r}");
}

#[test]
fn tortoise_is_accepted_without_obligations() {
    let r = report("tortoise.proof");
    assert!(r.is_clean(), "{r}");
}

#[test]
fn partition2_is_accepted() {
    let r = report("partition2.proof");
    assert!(r.is_accepted(), "{r}");
}

#[test]
fn partition3_is_accepted() {
    let r = report("partition3.proof");
    assert!(r.is_accepted(), "{r}");
}

const SMALL: [&str; 6] =
    ["geometric.proof", "counter.proof", "nt.proof", "mallocdiv.proof", "countdown.proof", "tortoise.proof"];

#[test]
fn mutants_are_rejected_with_their_class() {
    let cfg = CheckConfig::default();
    let mut failures = Vec::new();
    let mut total = 0;
    for name in SMALL.iter().chain(["partition2.proof"].iter()) {
        for m in mutants(&corpus(name)) {
            total += 1;
            let r = check_proof(&m.proof, &cfg);
            if r.rejection_class() != Some(m.expected(&cfg)) {
                failures.push(format!(
                    "{name} {} at {}: got {:?}\n{r}",
                    m.mutation,
                    display_path(&m.path),
                    r.rejection_class()
                ));
            }
        }
    }
    assert!(total >= 30, "only {total} mutants");
    assert!(failures.is_empty(), "{} of {total} mutants misclassified:\n{}", failures.len(), failures.join("\n"));
}

#[test]
fn elaboration_keeps_verdicts() {
    let cfg = CheckConfig::default();
    for name in SMALL {
        let p = corpus(name);
        let e = p.with_root(elaborate_derived(&p.root));
        let (a, b) = (check_proof(&p, &cfg), check_proof(&e, &cfg));
        assert_eq!(a.is_accepted(), b.is_accepted(), "{name}:\n{a}\n{b}");
    }
}
