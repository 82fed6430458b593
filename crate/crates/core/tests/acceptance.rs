//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tol::lang::{parse_program, Command, Guard, Program, State};
use tol::laws::run_laws;
use tol::proofs::{check_proof, mutants, CheckConfig, CheckReport, Proof};
use tol::semantics::{eval_command, lfp_iterate, EvalConfig, EvalResult, Status, Unroller, Value};
use tol::semiring::{Semiring, Weight};
use tol::transformers::{
    random_command, random_predicate, subsumption_oracle, FiniteDomain, GenConfig, Theorem, TripleConfig,
};
use tol::weighting::{Outcome, Weighting};

type Outcome_ = Result<String, String>;

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn program(name: &str) -> Program {
    let text = std::fs::read_to_string(corpus(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    parse_program(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn proof(name: &str) -> CheckReport {
    let p = Proof::load(&corpus(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    check_proof(&p, &CheckConfig::default())
}

fn run(p: &Program, sr: Semiring, k: usize, init: &State) -> EvalResult {
    let m = Weighting::unit_state(sr, p.state_with(init).unwrap());
    eval_command(&p.body, &m, &EvalConfig::new(k, 4).unwrap()).unwrap()
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn st(pairs: &[(&str, i64)]) -> State {
    State::from_pairs(pairs.iter().map(|(k, v)| (*k, BigRational::from_integer(BigInt::from(*v)))))
}

fn within(t: Instant, limit: Duration) -> Result<(), String> {
    let e = t.elapsed();
    if e <= limit {
        Ok(())
    } else {
        Err(format!("took {e:.2?}, limit {limit:?}"))
    }
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

/// Splits a program into the commands before its loop and the loop itself.
fn split_loop(c: &Command) -> Option<(Command, Command, Guard, Guard)> {
    match c {
        Command::Iter(b, e1, e2) => Some((Command::Skip, (**b).clone(), e1.clone(), e2.clone())),
        Command::Seq(a, b) => {
            let (pre, body, e1, e2) = split_loop(b)?;
            Some((Command::seq((**a).clone(), pre), body, e1, e2))
        }
        _ => None,
    }
}

fn geometric() -> Outcome_ {
    let t = Instant::now();
    let r = run(&program("geometric.prog"), Semiring::Prob, 40, &State::new());
    let mut p = q(1, 2);
    for k in 0..40 {
        let v = r.value(&Outcome::State(st(&[("x", k)])));
        ensure!(v == Value::Exact(Weight::Rat(p.clone())), "P(x={k}) = {v}, expected {p}");
        p /= BigInt::from(2);
    }
    let div = r.value(&Outcome::Div);
    let bound = q(1, 1 << 40);
    ensure!(div.hi() == Some(&Weight::Rat(bound.clone())), "divergence bracket {div}");
    ensure!(bound < q(1, 1_000_000_000), "bound {bound} not below 1e-9");
    within(t, Duration::from_secs(1))?;
    Ok(format!("P(x=k) = 1/2^(k+1) exactly for k < 40, divergence <= 2^-40, {:.0?}", t.elapsed()))
}

fn counter() -> Outcome_ {
    let t = Instant::now();
    let p = program("counter.prog");
    let r = run(&p, Semiring::Bool, 100, &State::new());
    for k in 0..100 {
        let v = r.value(&Outcome::State(st(&[("x", k)])));
        ensure!(v == Value::Exact(Weight::Bool(true)), "x={k} has {v}");
    }
    let core = p.core().unwrap();
    let (pre, body, e1, e2) = split_loop(&core).ok_or("no loop")?;
    let cfg = EvalConfig::new(100, 4).unwrap();
    let start = eval_command(&pre, &Weighting::unit_state(Semiring::Bool, p.zero_state()), &cfg).unwrap();
    let mut u = Unroller::new(&body, &e1, &e2, start.exact_weighting().unwrap(), &cfg).unwrap();
    for n in 0..100 {
        let mass = u.approx().residual.mass(Semiring::Bool);
        ensure!(mass == Weight::Bool(true), "residual mass {mass} at step {n}");
        u.force_step().unwrap();
    }
    let rep = proof("counter.proof");
    ensure!(rep.is_clean(), "proof not clean:\n{rep}");
    within(t, Duration::from_secs(1))?;
    Ok(format!(
        "x=k for every k < 100, residual 1 at every step, proof accepted with 0 obligations, {:.0?}",
        t.elapsed()
    ))
}

fn nt() -> Outcome_ {
    let t = Instant::now();
    let r = run(&program("nt.prog"), Semiring::Bool, 64, &State::new());
    let Status::CycleDetected(period) = r.status else { return Err(format!("status {}", r.status)) };
    ensure!(r.value(&Outcome::Div) == Value::Exact(Weight::Bool(true)), "divergence {}", r.value(&Outcome::Div));
    ensure!(r.known.states().next().is_none() && r.pending.is_none(), "terminating outcomes in {}", r.known);
    let rep = proof("nt.proof");
    ensure!(rep.is_accepted(), "proof:\n{rep}");
    within(t, Duration::from_secs(1))?;
    Ok(format!(
        "DIV exact 1 by a residual cycle of period {period}, no terminating outcome, proof accepted, {:.0?}",
        t.elapsed()
    ))
}

fn mallocdiv() -> Outcome_ {
    let t = Instant::now();
    let r = run(&program("mallocdiv.prog"), Semiring::Bool, 64, &State::new());
    let set = r.value(&Outcome::State(st(&[("p", 1)])));
    ensure!(set == Value::Exact(Weight::Bool(true)), "flag-set outcome {set}");
    ensure!(r.value(&Outcome::Div) == Value::Exact(Weight::Bool(true)), "divergence {}", r.value(&Outcome::Div));
    ensure!(matches!(r.status, Status::CycleDetected(_)), "status {}", r.status);
    let p = Proof::load(&corpus("mallocdiv.proof")).unwrap();
    ensure!(p.root.post.to_string() == "dia DIV", "conclusion {}", p.root.post);
    let rep = check_proof(&p, &CheckConfig::default());
    ensure!(rep.is_accepted(), "proof:\n{rep}");
    within(t, Duration::from_secs(1))?;
    Ok(format!("p=1 terminates, residual persists as DIV, proof of dia DIV accepted, {:.0?}", t.elapsed()))
}

fn tortoise() -> Outcome_ {
    let t = Instant::now();
    let sr = Semiring::Prob;
    let p = program("tortoise.prog");
    let r = run(&p, sr, 50, &State::new());
    let meet = Outcome::State(st(&[("t", 2), ("h", 2), ("k", 1)]));
    ensure!(r.value(&meet) == Value::Exact(Weight::rat(1, 2)), "h=t outcome {}", r.value(&meet));
    ensure!(r.known.states().count() == 1, "other terminating states in {}", r.known);

    let core = p.core().unwrap();
    let (pre, body, e1, e2) = split_loop(&core).ok_or("no loop")?;
    let cfg = EvalConfig::new(50, 4).unwrap();
    let start = eval_command(&pre, &Weighting::unit_state(sr, p.zero_state()), &cfg).unwrap();
    let mut u = Unroller::new(&body, &e1, &e2, start.exact_weighting().unwrap(), &cfg).unwrap();
    // After `n + 1` steps the residual is the image of `n + 1` entered iterations.
    for steps in 0..=51 {
        let a = u.approx();
        let (done, left) = (a.collected.mass().unwrap(), a.residual.mass(sr));
        ensure!(sr.add(&done, &left).unwrap() == sr.one(), "mass {done} + {left} after {steps} steps");
        if steps >= 2 {
            ensure!(left == Weight::rat(1, 2), "residual {left} at n={}", steps - 1);
            ensure!(a.collected.get(&meet) == Weight::rat(1, 2), "terminating mass moved at n={}", steps - 1);
        }
        u.force_step().unwrap();
    }
    let rep = proof("tortoise.proof");
    ensure!(rep.is_clean(), "proof:\n{rep}");
    within(t, Duration::from_secs(5))?;
    Ok(format!("h=t with exactly 1/2 from iteration 1, residual exactly 1/2 for n >= 1, mass conserved, proof accepted, {:.0?}", t.elapsed()))
}

/// The partition program for an array of length `n`.
fn partition_program(n: usize) -> Program {
    let text = std::fs::read_to_string(corpus("partition4.prog")).unwrap();
    let body = text.split_once('\n').unwrap().1;
    let arrays: Vec<String> = (0..n).map(|i| format!("A{i}")).collect();
    let header = ["i", "j", "n", "pivot", "tmp"].iter().map(|s| s.to_string()).chain(arrays).collect::<Vec<_>>();
    parse_program(&format!("vars {}\n{body}", header.join(", "))).unwrap()
}

fn int(s: &State, v: &str) -> i64 {
    s.get(v).unwrap().to_integer().try_into().unwrap()
}

fn partition() -> Outcome_ {
    let t = Instant::now();
    let mut runs = 0;
    for len in 1..=4usize {
        let p = partition_program(len);
        for code in 0..4usize.pow(len as u32 + 1) {
            let pivot = (code % 4) as i64;
            let values: Vec<i64> = (0..len).map(|i| (code / 4usize.pow(i as u32 + 1) % 4) as i64).collect();
            let mut init = vec![("n".to_string(), len as i64), ("pivot".to_string(), pivot)];
            init.extend(values.iter().enumerate().map(|(i, v)| (format!("A{i}"), *v)));
            let init =
                State::from_pairs(init.iter().map(|(k, v)| (k.as_str(), BigRational::from_integer((*v).into()))));
            let r = run(&p, Semiring::Bool, 64, &init);
            ensure!(r.status == Status::Stabilized && r.pending.is_none(), "{values:?}/{pivot}: {}", r.status);
            let finals: Vec<&State> = r.known.states().map(|(s, _)| s).collect();
            ensure!(finals.len() == 1 && !r.known.has_div(), "{values:?}/{pivot}: {}", r.known);
            let s = finals[0];
            let (i, j) = (int(s, "i"), int(s, "j"));
            let a: Vec<i64> = (0..len).map(|k| int(s, &format!("A{k}"))).collect();
            let alpha = (0..i).all(|k| a[k as usize] <= pivot);
            let beta = (j + 1..len as i64).all(|k| a[k as usize] >= pivot);
            ensure!(alpha && beta && i > j, "{values:?}/{pivot} ends in {s}");
            let (mut x, mut y) = (a.clone(), values.clone());
            x.sort();
            y.sort();
            ensure!(x == y, "{values:?}/{pivot}: not a permutation, {a:?}");
            runs += 1;
        }
    }
    let rep = proof("partition3.proof");
    ensure!(rep.is_accepted(), "proof:\n{rep}");
    within(t, Duration::from_secs(30))?;
    Ok(format!(
        "{runs} arrays of length 1 to 4 stabilize into partitions, length-3 proof accepted, {:.1?}",
        t.elapsed()
    ))
}

const SUBSUMPTION_SEED: u64 = 2024;

fn subsumption() -> Outcome_ {
    let t = Instant::now();
    let d = FiniteDomain::parse("x:0..3, y:0..3").unwrap();
    let cfg = TripleConfig::default();
    let gc = GenConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SUBSUMPTION_SEED);
    let programs = 500;
    for i in 0..programs {
        let c = random_command(&mut rng, &gc);
        let (p, q) = (random_predicate(&mut rng, &gc), random_predicate(&mut rng, &gc));
        for th in Theorem::ALL {
            let r = subsumption_oracle(th, &c, &p, &q, &d, &cfg).map_err(|e| format!("#{i}: {e}"))?;
            ensure!(r.agrees() == Some(true), "#{i} {th:?} on {c} / {p} / {q}: {r:?}");
        }
    }
    within(t, Duration::from_secs(60))?;
    Ok(format!("{programs} programs x 3 theorems agree (seed {SUBSUMPTION_SEED}), {:.1?}", t.elapsed()))
}

const LAW_SEED: u64 = 7;

fn laws() -> Outcome_ {
    let t = Instant::now();
    let mut checked = 0;
    for sr in [Semiring::Bool, Semiring::Prob, Semiring::Nat] {
        for r in run_laws(sr, 1000, LAW_SEED) {
            ensure!(r.passed(), "{r}");
            checked += r.checked;
        }
    }
    within(t, Duration::from_secs(30))?;
    Ok(format!("{checked} law instances over bool, prob, nat with no failure (seed {LAW_SEED}), {:.1?}", t.elapsed()))
}

fn unrolling() -> Outcome_ {
    let cases: [(&str, Semiring, &[(&str, i64)], usize); 8] = [
        ("geometric.prog", Semiring::Prob, &[], 20),
        ("counter.prog", Semiring::Bool, &[], 20),
        ("nt.prog", Semiring::Bool, &[], 20),
        ("mallocdiv.prog", Semiring::Bool, &[], 20),
        ("tortoise.prog", Semiring::Prob, &[], 12),
        ("countdown.prog", Semiring::Bool, &[("x", 5)], 20),
        ("partition3.prog", Semiring::Bool, &[("n", 3), ("A0", 2), ("A1", 0), ("A2", 1), ("pivot", 1)], 20),
        ("partition4.prog", Semiring::Bool, &[("n", 4), ("A0", 3), ("A1", 1), ("A2", 2), ("A3", 0), ("pivot", 2)], 20),
    ];
    let cfg = EvalConfig::new(64, 1).unwrap();
    let mut compared = 0;
    for (name, sr, init, k) in cases {
        let p = program(name);
        let core = p.core().unwrap();
        let (pre, body, e1, e2) = split_loop(&core).ok_or(format!("{name}: no loop"))?;
        let start = eval_command(&pre, &Weighting::unit_state(sr, p.state_with(&st(init)).unwrap()), &cfg).unwrap();
        for (s, _) in start.exact_weighting().unwrap().states() {
            let chain = lfp_iterate(&body, &e1, &e2, s, k, sr, &cfg).unwrap();
            let mut u = Unroller::new(&body, &e1, &e2, &Weighting::unit_state(sr, s.clone()), &cfg).unwrap();
            for (n, phi) in chain.iter().enumerate() {
                let rebuilt = u.approx().reconstruct().unwrap();
                ensure!(&rebuilt == phi, "{name} from {s}, n={n}: {rebuilt} vs {phi}");
                u.force_step().unwrap();
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} unrollings equal the Kleene iterates (K = 20; tortoise K = 12)"))
}

fn mutation() -> Outcome_ {
    let cfg = CheckConfig::default();
    let mut total = 0;
    let names = ["geometric", "counter", "nt", "mallocdiv", "countdown", "tortoise", "partition2"];
    for name in names {
        let p = Proof::load(&corpus(&format!("{name}.proof"))).unwrap();
        for m in mutants(&p) {
            let r = check_proof(&m.proof, &cfg);
            let want = m.expected(&cfg);
            ensure!(r.root.is_rejected(), "{name} {} at {} accepted", m.mutation, m.path);
            ensure!(
                r.rejection_class() == Some(want),
                "{name} {} at {}: {:?} not {want:?}",
                m.mutation,
                m.path,
                r.rejection_class()
            );
            total += 1;
        }
    }
    ensure!(total >= 30, "only {total} mutants");
    Ok(format!("{total} mutants rejected with their expected reason class"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome_); 10] = [
        ("geometric loop", geometric),
        ("unbounded counter", counter),
        ("Nt diverges", nt),
        ("MallocDiv may diverge", mallocdiv),
        ("tortoise and hare", tortoise),
        ("partition", partition),
        ("subsumption", subsumption),
        ("law suites", laws),
        ("unrolling cross-check", unrolling),
        ("proof mutation", mutation),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or(e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
