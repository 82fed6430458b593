use super::*;
use crate::lang::{parse_program, Program};
use crate::semiring::{rat, rat_int};

fn prog(src: &str) -> Program {
    parse_program(src).unwrap()
}

fn run(src: &str, sr: Semiring, k: usize) -> EvalResult {
    let p = prog(src);
    let m = Weighting::unit_state(sr, p.zero_state());
    eval_command(&p.core().unwrap(), &m, &EvalConfig::new(k, 4).unwrap()).unwrap()
}

fn st(pairs: &[(&str, i64)]) -> State {
    State::from_pairs(pairs.iter().map(|(k, v)| (*k, rat_int(*v))))
}

fn so(pairs: &[(&str, i64)]) -> Outcome {
    Outcome::State(st(pairs))
}

/// Splits `iter C [e1][e2]` at the end of a program into its parts.
fn loop_parts(p: &Program) -> (Command, Command, Guard, Guard) {
    match p.core().unwrap() {
        Command::Seq(pre, l) => match *l {
            Command::Iter(b, e1, e2) => (*pre, *b, e1, e2),
            _ => panic!("no trailing loop"),
        },
        Command::Iter(b, e1, e2) => (Command::Skip, *b, e1, e2),
        _ => panic!("no trailing loop"),
    }
}

#[test]
fn straight_line_examples() {
    let sr = Semiring::Prob;
    let s = st(&[("x", 0)]);
    let m = Weighting::unit_state(sr, s.clone());
    let cfg = EvalConfig::default();
    assert_eq!(eval_command(&Command::Skip, &m, &cfg).unwrap().known, m);
    let half = Command::Assume(Guard::Const(Weight::rat(1, 2)));
    let r = eval_command(&half, &m, &cfg).unwrap();
    assert_eq!(r.known.get(&Outcome::State(s)), Weight::rat(1, 2));
    assert!(r.is_exact());
    let b = run("vars x\nx := 1 + x := 2", Semiring::Bool, 8);
    let expect = Weighting::parse(Semiring::Bool, "{ (x=1): 1, (x=2): 1 }").unwrap();
    assert_eq!(b.exact_weighting(), Some(&expect));
}

#[test]
fn geometric_loop_is_exact_below_the_cutoff() {
    let r = run("vars x\nx := 0; iter (x := x + 1) [1/2][1/2]", Semiring::Prob, 10);
    for k in 0..10 {
        let want = Weight::Rat(rat(1, 1 << (k + 1)));
        assert_eq!(r.value(&so(&[("x", k)])), Value::Exact(want), "x={k}");
    }
    assert_eq!(r.value(&Outcome::Div), Value::Interval(Weight::rat(0, 1), Some(Weight::rat(1, 1024))));
    assert_eq!(r.status, Status::Cutoff(10));
    assert_eq!(r.value(&so(&[("x", 10)])), Value::Interval(Weight::rat(0, 1), Some(Weight::rat(1, 1024))));
}

#[test]
fn boolean_counter_never_resolves() {
    let p = prog("vars x\nx := 0; iter (x := x + 1) [1][1]");
    let (pre, body, e1, e2) = loop_parts(&p);
    let sr = Semiring::Bool;
    let cfg = EvalConfig::new(30, 4).unwrap();
    let start = eval_command(&pre, &Weighting::unit_state(sr, p.zero_state()), &cfg).unwrap().known;
    let mut u = Unroller::new(&body, &e1, &e2, &start, &cfg).unwrap();
    for n in 1..=30 {
        u.step().unwrap();
        assert_eq!(u.approx().residual.mass(sr), sr.one());
        assert_eq!(u.approx().collected.get(&so(&[("x", n - 1)])), sr.one());
    }
    let r = u.finish().unwrap();
    assert_eq!(r.status, Status::Cutoff(30));
    assert_eq!(r.value(&Outcome::Div), Value::Interval(sr.zero(), Some(sr.one())));
}

#[test]
fn false_loop_returns_input() {
    let r = run("vars x\nx := 3; while fls do skip", Semiring::Prob, 5);
    assert_eq!(r.status, Status::Stabilized);
    assert_eq!(r.exact_weighting().unwrap().get(&so(&[("x", 3)])), Weight::rat(1, 1));
}

#[test]
fn nt_cycles_into_divergence() {
    let r = run("vars x, y\nx := 1; y := 2; while x + y > 1 do (x := 3 - x; y := 3 - y)", Semiring::Bool, 64);
    assert_eq!(r.status, Status::CycleDetected(2));
    let m = r.exact_weighting().unwrap();
    assert_eq!(m.len(), 1);
    assert_eq!(m.div_weight(), Weight::Bool(true));
}

#[test]
fn malloc_loop_may_diverge() {
    let r = run("vars p\np := nondet_flag; while p = 0 do p := nondet_flag", Semiring::Bool, 64);
    assert_eq!(r.status, Status::CycleDetected(1));
    let m = r.exact_weighting().unwrap();
    assert_eq!(m.get(&so(&[("p", 1)])), Weight::Bool(true));
    assert!(m.has_div());
}

const TORTOISE: &str = "vars t, h, k\nt := 1; h := 0; k := 0;\nwhile h < t do (t := t + 1; (h := h + 1) +[1/2] (h := h + 1 + 2^(-k)); k := k + 1)";

#[test]
fn tortoise_keeps_half_the_mass_iterating() {
    let p = prog(TORTOISE);
    let (pre, body, e1, e2) = loop_parts(&p);
    let sr = Semiring::Prob;
    let cfg = EvalConfig { state_budget: 256, ..EvalConfig::new(50, 4).unwrap() };
    let start = eval_command(&pre, &Weighting::unit_state(sr, p.zero_state()), &cfg).unwrap().known;
    let mut u = Unroller::new(&body, &e1, &e2, &start, &cfg).unwrap();
    u.step().unwrap();
    assert_eq!(u.approx().residual.mass(sr), Weight::rat(1, 1));
    for _ in 1..50 {
        u.step().unwrap();
        let a = u.approx();
        assert_eq!(a.residual.mass(sr), Weight::rat(1, 2), "steps={}", a.steps);
        assert_eq!(a.collected.mass().unwrap(), Weight::rat(1, 2));
    }
    assert!(matches!(u.approx().residual, Residual::Summary(_)));
    let r = u.finish().unwrap();
    let caught = Outcome::State(State::from_pairs([("h", rat_int(2)), ("k", rat_int(1)), ("t", rat_int(2))]));
    assert_eq!(r.value(&caught), Value::Exact(Weight::rat(1, 2)));
    assert_eq!(r.value(&Outcome::Div), Value::Interval(Weight::rat(0, 1), Some(Weight::rat(1, 2))));
}

#[test]
fn phi_examples() {
    let sr = Semiring::Prob;
    let cfg = EvalConfig::default();
    let s = st(&[("x", 0)]);
    let mut bottom = |_: &State| Ok(Weighting::div(sr, sr.one()));
    let t = Guard::Bool(crate::lang::BExpr::True);
    let f = Guard::Bool(crate::lang::BExpr::False);
    let r = phi_step(&mut bottom, &s, &Command::Skip, &t, &f, sr, &cfg).unwrap();
    assert_eq!(r, Weighting::div(sr, sr.one()));
    let r = phi_step(&mut bottom, &s, &Command::Skip, &f, &t, sr, &cfg).unwrap();
    assert_eq!(r, Weighting::unit_state(sr, s.clone()));
    let half = Guard::Const(Weight::rat(1, 2));
    let inc = Command::assign("x", crate::lang::parse_expr("x + 1").unwrap());
    let r = phi_step(&mut bottom, &s, &inc, &half, &half, sr, &cfg).unwrap();
    let want = Weighting::parse(sr, "{ (x=0): 1/2, DIV: 1/2 }").unwrap();
    assert_eq!(r, want);
}

#[test]
fn kleene_chain_examples() {
    let sr = Semiring::Prob;
    let cfg = EvalConfig::default();
    let inc = Command::assign("x", crate::lang::parse_expr("x + 1").unwrap());
    let half = Guard::Const(Weight::rat(1, 2));
    let chain = lfp_iterate(&inc, &half, &half, &st(&[("x", 0)]), 3, sr, &cfg).unwrap();
    assert_eq!(chain[3].div_weight(), Weight::rat(1, 8));
    for w in chain.windows(2) {
        assert!(w[0].fusion_leq(&w[1]));
    }
    let p = prog("vars x\nwhile x > 0 do x := x - 1");
    let (_, body, e1, e2) = loop_parts(&p);
    let chain = lfp_iterate(&body, &e1, &e2, &st(&[("x", 2)]), 5, Semiring::Bool, &cfg).unwrap();
    let done = Weighting::unit_state(Semiring::Bool, st(&[("x", 0)]));
    assert_ne!(chain[2], done);
    assert_eq!(chain[3], done);
    assert_eq!(chain[5], done);
}

#[test]
fn unroller_reconstructs_the_kleene_chain() {
    for (src, sr, init) in [
        ("vars x\niter (x := x + 1) [1/2][1/2]", Semiring::Prob, vec![("x", 0)]),
        ("vars x\nwhile x > 0 do x := x - 1", Semiring::Bool, vec![("x", 3)]),
        ("vars x, y\nwhile x + y > 1 do (x := 3 - x; y := 3 - y)", Semiring::Bool, vec![("x", 1), ("y", 2)]),
        ("vars p\nwhile p = 0 do p := nondet_flag", Semiring::Bool, vec![("p", 0)]),
        ("vars x\nwhile x < 4 do (x := x + 1 +[1/3] x := x + 2)", Semiring::Prob, vec![("x", 0)]),
    ] {
        let p = prog(src);
        let (_, body, e1, e2) = loop_parts(&p);
        let s = st(&init);
        let cfg = EvalConfig::new(64, 1).unwrap();
        let chain = lfp_iterate(&body, &e1, &e2, &s, 12, sr, &cfg).unwrap();
        let mut u = Unroller::new(&body, &e1, &e2, &Weighting::unit_state(sr, s), &cfg).unwrap();
        for (n, phi) in chain.iter().enumerate() {
            assert_eq!(u.approx().steps, n);
            assert_eq!(&u.approx().reconstruct().unwrap(), phi, "{src} n={n}");
            u.force_step().unwrap();
        }
    }
}

#[test]
fn divergence_passes_through() {
    for sr in [Semiring::Bool, Semiring::Prob] {
        for src in
            ["vars x\nx := 1", "vars x\nassume x > 0", "vars x\nwhile x < 3 do x := x + 1", "vars x\nskip + x := 2"]
        {
            let p = prog(src);
            let d = Weighting::unit(sr, Outcome::Div);
            let r = eval_command(&p.core().unwrap(), &d, &EvalConfig::default()).unwrap();
            assert_eq!(r.exact_weighting(), Some(&d), "{src}");
        }
    }
}

#[test]
fn spost_examples() {
    let sr = Semiring::Bool;
    let cfg = EvalConfig::default();
    let m = Weighting::unit_state(sr, st(&[("x", 0)]));
    let out = spost(&Command::Skip, std::slice::from_ref(&m), &cfg).unwrap();
    assert_eq!(out[0].known, m);
    let out = spost(&prog("vars x\nx := 1").body, std::slice::from_ref(&m), &cfg).unwrap();
    assert_eq!(out[0].known, Weighting::unit_state(sr, st(&[("x", 1)])));
    let out = spost(&prog("vars x\nx := 1 + x := 2").core().unwrap(), &[m], &cfg).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].known.len(), 2);
}

#[test]
fn trace_collects_visited_states() {
    let p = prog("vars x\nx := 0; while x < 3 do x := x + 1");
    let m = Weighting::unit_state(Semiring::Bool, p.zero_state());
    let (_, states) = eval_traced(&p.core().unwrap(), &m, &EvalConfig::default()).unwrap();
    let xs: Vec<i64> = states.iter().map(|s| s.get("x").unwrap().to_integer().try_into().unwrap()).collect();
    assert_eq!(xs, vec![0, 1, 2, 3]);
}

#[test]
fn lint_flags_bare_scaling() {
    let p = prog("vars x\nassume 1/2; (x := 1 +[1/2] x := 2)");
    assert_eq!(lint(&p.body, Semiring::Prob).len(), 1);
    assert!(lint(&p.body, Semiring::Bool).is_empty());
}

#[test]
fn report_round_trips_through_json() {
    let r = run("vars x\nx := 0; iter (x := x + 1) [1/2][1/2]", Semiring::Prob, 4);
    let json = serde_json::to_string(&r.report()).unwrap();
    let back: Report = serde_json::from_str(&json).unwrap();
    assert_eq!(back, r.report());
    assert!(r.to_string().contains("DIV: [0, 1/16]"));
}
