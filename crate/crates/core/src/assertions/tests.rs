use super::*;
use crate::lang::{parse_bexpr, Guard};
use crate::semiring::{rat, rat_int, Semiring, Weight};
use crate::transformers::FiniteDomain;
use crate::weighting::{Outcome, Weighting};

fn st(x: i64) -> Outcome {
    Outcome::State(State::from_pairs([("x", rat_int(x))]))
}

fn w(sr: Semiring, text: &str) -> Weighting {
    Weighting::parse(sr, text).unwrap()
}

fn a(text: &str) -> Assertion {
    parse_assertion(text).unwrap()
}

fn b(text: &str) -> BExpr {
    parse_bexpr(text).unwrap()
}

fn sat(m: &Weighting, phi: &str) -> Truth {
    satisfies(m, &a(phi), &Scope::new(m.semiring()))
}

/// Every Boolean weighting over the given outcomes.
fn all_bool(outcomes: &[Outcome]) -> Vec<Weighting> {
    (0u32..1 << outcomes.len())
        .map(|mask| {
            let es = outcomes
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, o)| (o.clone(), Weight::Bool(true)));
            Weighting::from_entries(Semiring::Bool, es).unwrap()
        })
        .collect()
}

#[test]
fn parse_and_print_round_trip() {
    for text in [
        "(x = 1)^(1/2) ++ DIV^(1/2)",
        "(box x >= 0) /\\ ~(dia x = 2)",
        "box x >= 0 /\\ x <= 2",
        "exists k in 0..3. (x = k)^(1/3)",
        "exists u, v : weight. (x > 0)^(u) ++ DIV^(v)",
        "[1/2] * ((x = 1) ++ (x = 2)) => TOP",
        "one{(x=1): 1/2, DIV: 1/2}",
        "oplus k >= 0. (x = k)^((1/2)^k * (1/2))",
        "supp_meets_div x = 0 \\/ BOT",
    ] {
        let phi = a(text);
        assert_eq!(a(&phi.to_string()), phi, "{text}");
    }
}

#[test]
fn parenthesized_predicate_is_an_atom() {
    assert_eq!(a("(x = 1)"), Assertion::atom(b("x = 1")));
    assert_eq!(a("(x = 1 /\\ y = 2)^(1/2)"), Assertion::Atom(b("x = 1 /\\ y = 2"), WExpr::Num(Expr::Num(rat(1, 2)))));
    assert!(parse_assertion("x = 1 ^ (2)").is_err() || a("x = 1 ^ (2)") != Assertion::Top);
}

#[test]
fn divergence_atom() {
    let m = Weighting::unit(Semiring::Bool, Outcome::Div);
    assert_eq!(sat(&m, "DIV"), Truth::Yes);
    assert_eq!(sat(&m, "(true)"), Truth::No);
}

#[test]
fn box_admits_divergence_but_total_box_does_not() {
    let m = w(Semiring::Bool, "{ (x=1): 1, DIV: 1 }");
    assert_eq!(sat(&m, "box x = 1"), Truth::Yes);
    assert_eq!(sat(&m, "boxT x = 1"), Truth::No);
    assert_eq!(sat(&m, "dia x = 1"), Truth::Yes);
    assert_eq!(sat(&m, "dia x = 2"), Truth::No);
}

#[test]
fn partial_diamond_accepts_pure_divergence() {
    let m = Weighting::unit(Semiring::Prob, Outcome::Div);
    assert_eq!(sat(&m, "diaP x = 0"), Truth::Yes);
    assert_eq!(sat(&m, "dia x = 0"), Truth::No);
}

#[test]
fn probabilistic_split_has_a_witness() {
    let m = w(Semiring::Prob, "{ (x=1): 1/2, (x=2): 1/2 }");
    let phi = a("(x = 1)^(1/2) ++ (x = 2)^(1/2)");
    let scope = Scope::new(Semiring::Prob);
    assert_eq!(satisfies(&m, &phi, &scope), Truth::Yes);
    let parts: Vec<&Assertion> = phi.summands();
    let split = split_witness(&m, &parts, &scope).unwrap().unwrap();
    assert_eq!(split[0], w(Semiring::Prob, "{ (x=1): 1/2 }"));
    assert_eq!(split[1], w(Semiring::Prob, "{ (x=2): 1/2 }"));
}

#[test]
fn overlapping_probabilistic_split() {
    // Parts overlap on x=1, so mass must be shared across it.
    let m = w(Semiring::Prob, "{ (x=0): 1/4, (x=1): 1/2, (x=2): 1/4 }");
    assert_eq!(sat(&m, "(x <= 1)^(1/2) ++ (x >= 1)^(1/2)"), Truth::Yes);
    assert_eq!(sat(&m, "(x <= 1)^(1/4) ++ (x >= 1)^(3/4)"), Truth::Yes);
    assert_eq!(sat(&m, "(x = 0)^(1/2) ++ (x >= 1)^(1/2)"), Truth::No);
    assert_eq!(sat(&m, "(x <= 1)^(1/2) ++ (x = 2)^(1/2)"), Truth::No);
}

#[test]
fn natural_split_is_integral() {
    let m = w(Semiring::Nat, "{ (x=0): 2, (x=1): 3 }");
    assert_eq!(sat(&m, "(x <= 1)^(4) ++ (x = 1)^(1)"), Truth::Yes);
    assert_eq!(sat(&m, "(x = 0)^(3) ++ (x = 1)^(2)"), Truth::No);
    assert_eq!(sat(&m, "dia x = 0"), Truth::Yes);
}

#[test]
fn singleton_and_scaling() {
    let m = w(Semiring::Prob, "{ (x=1): 1/4, DIV: 1/4 }");
    assert_eq!(sat(&m, "one{(x=1): 1/4, DIV: 1/4}"), Truth::Yes);
    assert_eq!(sat(&m, "[1/2] * ((x = 1)^(1/2) ++ DIV^(1/2))"), Truth::Yes);
    assert_eq!(sat(&m, "((x = 1) ++ DIV) * [1/4]"), Truth::Yes);
    assert_eq!(sat(&m, "[1/2] * (x = 1)"), Truth::No);
}

#[test]
fn bounded_existentials() {
    let m = w(Semiring::Prob, "{ (x=2): 1 }");
    assert_eq!(sat(&m, "exists k in 0..3. (x = k)"), Truth::Yes);
    assert_eq!(sat(&m, "exists k in 0..2. (x = k)"), Truth::No);
    assert_eq!(sat(&m, "exists k : nat. (x = k)"), Truth::Yes);
}

#[test]
fn open_predicates_are_unknown() {
    let m = w(Semiring::Prob, "{ (x=2): 1 }");
    assert!(matches!(sat(&m, "(y = 2)"), Truth::Unknown(_)));
}

#[test]
fn modal_duality_is_exhaustive() {
    // Three states plus divergence give sixteen Boolean weightings.
    let outcomes = [st(0), st(1), st(2), Outcome::Div];
    let scope = Scope::new(Semiring::Bool);
    for p in ["x = 0", "x <= 1", "true", "false"] {
        let (p, np) = (b(p), BExpr::not(b(p)));
        for m in all_bool(&outcomes) {
            let s = |phi: Assertion| satisfies(&m, &phi, &scope);
            assert_eq!(s(Assertion::Dia(p.clone())), s(Assertion::Box(np.clone())).negate());
            assert_eq!(s(Assertion::Box(p.clone())), s(Assertion::Dia(np.clone())).negate());
            assert_eq!(s(Assertion::DiaP(p.clone())), s(Assertion::BoxT(np.clone())).negate());
            assert_eq!(s(Assertion::BoxT(p.clone())), s(Assertion::DiaP(np.clone())).negate());
        }
    }
}

#[test]
fn modal_expansion_preserves_satisfaction() {
    let outcomes = [st(0), st(1), Outcome::Div];
    let scope = Scope::new(Semiring::Bool);
    let p = b("x = 0");
    let modal = [
        Assertion::Box(p.clone()),
        Assertion::Dia(p.clone()),
        Assertion::BoxT(p.clone()),
        Assertion::DiaP(p),
        Assertion::AlwaysDiv,
        Assertion::SometimesDiv,
    ];
    for m in all_bool(&outcomes) {
        for phi in &modal {
            let direct = satisfies(&m, phi, &scope);
            assert_eq!(direct, satisfies(&m, &phi.expand_modal(), &scope), "{phi} on {m}");
            assert_eq!(direct, satisfies(&m, &phi.definitional(), &scope), "{phi} on {m}");
        }
    }
}

#[test]
fn guard_entailment_examples() {
    let scope = Scope::new(Semiring::Bool);
    let phi = a("(x = 1 /\\ y = 2)");
    let e = Guard::Bool(b("x + y = 3"));
    assert_eq!(entails_guard(&phi, &e, &scope), Entailment::Exact(Weight::Bool(true)));
    assert_eq!(entails_guard(&a("DIV"), &e, &scope), Entailment::No);
    let dom = FiniteDomain::parse("x:0..3").unwrap();
    let scope = Scope::new(Semiring::Prob).with_domain(dom);
    let phi = a("(x = 0)^(1/2) ++ (x >= 1)^(1/2)");
    assert_eq!(entails_guard(&phi, &Guard::Bool(b("x = 0")), &scope), Entailment::No);
    let phi = a("(x = 0)^(1/2) ++ (x = 0 /\\ true)^(1/2)");
    assert_eq!(entails_guard(&phi, &Guard::Bool(b("x < 1")), &scope), Entailment::Exact(Weight::rat(1, 1)));
}

#[test]
fn nontermination_is_syntactic() {
    assert!(is_nonterminating(&a("DIV^(1/2)")));
    assert!(is_nonterminating(&a("exists u : weight. DIV^(u)")));
    assert!(is_nonterminating(&a("[1/2] * DIV")));
    assert!(is_nonterminating(&a("box DIV")));
    assert!(!is_nonterminating(&a("(x = 1)^(1/2)")));
}

#[test]
fn implication_lattice() {
    let scope = Scope::new(Semiring::Prob);
    assert_eq!(implies(&a("(x = 1 /\\ y = 2)"), &a("(x + y = 3)"), &scope), Truth::Yes);
    assert_eq!(implies(&a("(x = 1)^(1/2) ++ DIV^(1/2)"), &a("box x = 1"), &scope), Truth::Yes);
    assert_eq!(implies(&a("(x = 1)^(1/2) ++ DIV^(1/2)"), &a("dia x >= 1"), &a_scope("x:0..2")), Truth::Yes);
    assert_eq!(implies(&a("boxT x = 1"), &a("box x >= 0"), &a_scope("x:0..2")), Truth::Yes);
    assert!(matches!(implies(&a("box x = 1"), &a("boxT x = 1"), &scope), Truth::Unknown(_)));
    let bool_scope = Scope::new(Semiring::Bool).with_domain(FiniteDomain::parse("x:0..1").unwrap());
    assert_eq!(implies(&a("box x = 1"), &a("boxT x = 1"), &bool_scope), Truth::No);
    assert_eq!(implies(&a("dia x = 1"), &a("~box x = 0"), &bool_scope), Truth::Yes);
}

fn a_scope(dom: &str) -> Scope {
    Scope::new(Semiring::Prob).with_domain(FiniteDomain::parse(dom).unwrap())
}

#[test]
fn geometric_family_converges() {
    let s = parse_schema("family n: (x = n)^((1/2)^n * (1 - 1/2))").unwrap();
    let scope = Scope::new(Semiring::Prob);
    match limit_of_family(&s, LimitKind::Converge, 8, &scope) {
        LimitVerdict::Certified(l) => {
            assert_eq!(l, Assertion::OPlusAll("n".into(), 0, Box::new(s.default.clone())));
        }
        other => panic!("{other:?}"),
    }
    // Independent check: partial sums approach one.
    let m = ExpSum::from_weight(&WExpr::Num(crate::lang::parse_expr("(1/2)^n * (1 - 1/2)").unwrap()), "n").unwrap();
    let partial: crate::semiring::Rational = (0..20).map(|n| m.eval(n)).sum();
    assert_eq!(partial, rat(1, 1) - rat(1, 1 << 20));
    assert_eq!(m.tail_sum(0), Some(rat(1, 1)));
}

#[test]
fn declared_limit_with_renamed_index() {
    let s = parse_schema("family n: (x = n)^((1/2)^(n + 1)); limit: oplus k >= 0. (x = k)^((1/2)^k * (1/2))").unwrap();
    let scope = Scope::new(Semiring::Prob);
    assert!(matches!(limit_of_family(&s, LimitKind::Converge, 8, &scope), LimitVerdict::Certified(_)));
}

#[test]
fn eventually_zero_family() {
    let s = parse_schema("family n: case 0: (x = 0)^(1/2); case 1: (x = 1)^(1/4); (x = n)^(0)").unwrap();
    let scope = Scope::new(Semiring::Prob);
    assert_eq!(
        limit_of_family(&s, LimitKind::Converge, 4, &scope),
        LimitVerdict::Certified(a("(x = 0)^(1/2) ++ (x = 1)^(1/4)"))
    );
}

#[test]
fn divergent_limits() {
    let scope = Scope::new(Semiring::Prob);
    let constant = parse_schema("family n: case 0: (x = 0); (x = n)^((1/2)^n) ++ (x = 0 - 1)^(1/2 - (1/2)^n)").unwrap();
    assert_eq!(limit_of_family(&constant, LimitKind::Diverge, 6, &scope), LimitVerdict::Certified(a("DIV^(1/2)")));
    let decay = parse_schema("family n: (x = n)^((1/2)^n)").unwrap();
    assert_eq!(limit_of_family(&decay, LimitKind::Diverge, 6, &scope), LimitVerdict::Certified(Assertion::nothing()));
    let bool_scope = Scope::new(Semiring::Bool);
    let always = parse_schema("family n: (x = n)").unwrap();
    assert_eq!(limit_of_family(&always, LimitKind::Diverge, 6, &bool_scope), LimitVerdict::Certified(a("DIV")));
}

#[test]
fn infimum_with_a_dip() {
    let e = crate::lang::parse_expr("1 - (1/2)^n * 2 + (1/4)^n").unwrap();
    let f = ExpSum::from_expr(&e, "n").unwrap();
    let oracle = (1..200).map(|n| f.eval(n)).min().unwrap();
    assert_eq!(oracle, rat(1, 4));
    assert_eq!(f.inf_from(1), Some(oracle));
    assert_eq!(f.inf_from(0), Some(rat(0, 1)));
    let rising = ExpSum::from_expr(&crate::lang::parse_expr("1/2 + (1/3)^n").unwrap(), "n").unwrap();
    assert_eq!(rising.inf_from(0), Some(rat(1, 2)));
}

#[test]
fn unrecognized_family_is_an_obligation() {
    let s = parse_schema("family n: (x = n)^(2^n)").unwrap();
    let scope = Scope::new(Semiring::Prob);
    assert!(matches!(limit_of_family(&s, LimitKind::Converge, 3, &scope), LimitVerdict::Obligation { .. }));
}
