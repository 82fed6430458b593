//! Property tests for the algebra, the language and the evaluator.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tol::assertions::Assertion;
use tol::lang::{parse_program, BExpr, Command, Guard, State};
use tol::semantics::{eval_command, lfp_iterate, EvalConfig, Unroller};
use tol::semiring::{rat, rat_int, Semiring, Weight};
use tol::transformers::{
    check_triple, random_command, random_predicate, wlp_box, wlpp, wp_total, wpp_diamond, FiniteDomain, GenConfig,
    Generator, TripleConfig,
};
use tol::weighting::{Outcome, Weighting, WeightingError};

fn prob() -> impl Strategy<Value = Weight> {
    (0i64..=12, 1i64..=12).prop_map(|(n, d)| Weight::rat(n.min(d), d))
}

fn nat() -> impl Strategy<Value = Weight> {
    (0u64..1000).prop_map(Weight::nat)
}

fn nat_inf() -> impl Strategy<Value = Weight> {
    prop_oneof![4 => (0u64..50).prop_map(Weight::nat), 1 => Just(Weight::Inf)]
}

fn weight(sr: Semiring) -> BoxedStrategy<Weight> {
    match sr {
        Semiring::Bool => any::<bool>().prop_map(Weight::Bool).boxed(),
        Semiring::Prob => prob().boxed(),
        Semiring::Nat => nat().boxed(),
        Semiring::NatInf => nat_inf().boxed(),
    }
}

fn any_semiring() -> impl Strategy<Value = Semiring> {
    prop_oneof![Just(Semiring::Bool), Just(Semiring::Prob), Just(Semiring::Nat), Just(Semiring::NatInf)]
}

fn triple() -> impl Strategy<Value = (Semiring, Weight, Weight, Weight)> {
    any_semiring().prop_flat_map(|sr| (Just(sr), weight(sr), weight(sr), weight(sr)))
}

fn x(v: i64) -> State {
    State::from_pairs([("x", rat_int(v))])
}

/// Weightings over states `x = 0..3` plus divergence. Probabilistic weights
/// are kept small enough that any two of them can be added.
fn weighting(sr: Semiring) -> BoxedStrategy<Weighting> {
    let w = match sr {
        Semiring::Prob => (0i64..=2).prop_map(|n| Weight::rat(n, 8)).boxed(),
        _ => weight(sr),
    };
    proptest::collection::vec(w, 4)
        .prop_map(move |ws| {
            let outcomes = [Outcome::State(x(0)), Outcome::State(x(1)), Outcome::State(x(2)), Outcome::Div];
            Weighting::from_entries(sr, outcomes.into_iter().zip(ws)).unwrap()
        })
        .boxed()
}

/// A kernel `x ↦ f[x]` on the three states.
fn kernel(sr: Semiring) -> BoxedStrategy<Vec<Weighting>> {
    proptest::collection::vec(weighting(sr), 3).boxed()
}

fn apply(f: &[Weighting], s: &State) -> Result<Weighting, WeightingError> {
    let i: usize = s.get("x").unwrap().to_integer().try_into().unwrap();
    Ok(f[i].clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn addition_is_commutative_and_associative((sr, a, b, c) in triple()) {
        prop_assert_eq!(sr.add(&a, &b).ok(), sr.add(&b, &a).ok());
        let l = sr.add(&a, &b).and_then(|ab| sr.add(&ab, &c));
        let r = sr.add(&b, &c).and_then(|bc| sr.add(&a, &bc));
        if let (Ok(l), Ok(r)) = (&l, &r) {
            prop_assert_eq!(l, r);
        } else if sr != Semiring::Prob {
            prop_assert!(false, "total semiring returned undefined");
        }
    }

    #[test]
    fn multiplication_is_associative_with_unit_and_annihilator((sr, a, b, c) in triple()) {
        prop_assert_eq!(sr.mul(&sr.mul(&a, &b), &c), sr.mul(&a, &sr.mul(&b, &c)));
        prop_assert_eq!(sr.mul(&a, &sr.one()), a.clone());
        prop_assert_eq!(sr.mul(&sr.one(), &a), a.clone());
        prop_assert_eq!(sr.mul(&a, &sr.zero()), sr.zero());
        prop_assert_eq!(sr.mul(&sr.zero(), &a), sr.zero());
        prop_assert_eq!(sr.add(&a, &sr.zero()).unwrap(), a);
    }

    #[test]
    fn multiplication_distributes_over_addition((sr, a, b, c) in triple()) {
        if let Ok(bc) = sr.add(&b, &c) {
            prop_assert_eq!(sr.mul(&a, &bc), sr.add(&sr.mul(&a, &b), &sr.mul(&a, &c)).unwrap());
            prop_assert_eq!(sr.mul(&bc, &a), sr.add(&sr.mul(&b, &a), &sr.mul(&c, &a)).unwrap());
        }
    }

    #[test]
    fn top_is_conservative_or_indicative((sr, a, _b, _c) in triple()) {
        let Some(top) = sr.top() else { return Ok(()) };
        match sr {
            Semiring::Prob => {
                if a != sr.zero() {
                    prop_assert!(sr.add(&a, &top).is_err());
                }
            }
            Semiring::NatInf | Semiring::Bool => {
                prop_assert_eq!(sr.add(&a, &top).unwrap(), top.clone());
                if a != sr.zero() {
                    prop_assert_eq!(sr.mul(&a, &top), top);
                }
            }
            Semiring::Nat => unreachable!("no top"),
        }
    }

    #[test]
    fn natural_order_is_a_partial_order((sr, a, b, c) in triple()) {
        prop_assert!(sr.natural_leq(&a, &a));
        if sr.natural_leq(&a, &b) && sr.natural_leq(&b, &a) {
            prop_assert_eq!(&a, &b);
        }
        if sr.natural_leq(&a, &b) && sr.natural_leq(&b, &c) {
            prop_assert!(sr.natural_leq(&a, &c));
        }
    }

    #[test]
    fn finite_sums_fold_left(sr in any_semiring(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ws: Vec<Weight> = (0..5).map(|_| {
            let e = sr.sample_elements();
            e[rand::Rng::gen_range(&mut rng, 0..e.len())].clone()
        }).collect();
        let mut acc = Ok(sr.zero());
        for w in &ws {
            acc = acc.and_then(|a| sr.add(&a, w));
        }
        prop_assert_eq!(sr.sum(&ws), acc);
    }

    #[test]
    fn unit_laws(m in weighting(Semiring::Prob), f in kernel(Semiring::Prob), i in 0i64..3) {
        let back = m.kleisli_extend(|s| Ok::<_, WeightingError>(Weighting::unit_state(Semiring::Prob, s.clone())));
        prop_assert_eq!(back.unwrap(), m);
        let u = Weighting::unit_state(Semiring::Prob, x(i));
        prop_assert_eq!(u.kleisli_extend(|s| apply(&f, s)).unwrap(), f[i as usize].clone());
    }

    #[test]
    fn extension_is_associative(
        (sr, m, f, g) in any_semiring().prop_flat_map(|sr| (Just(sr), weighting(sr), kernel(sr), kernel(sr)))
    ) {
        let left = m.kleisli_extend(|s| apply(&g, s)).and_then(|gm| gm.kleisli_extend(|s| apply(&f, s)));
        let right = m.kleisli_extend(|s| apply(&g, s)?.kleisli_extend(|t| apply(&f, t)));
        match (left, right) {
            (Ok(l), Ok(r)) => prop_assert_eq!(l, r),
            // Probabilistic images may exceed mass one on either side.
            _ => prop_assert_eq!(sr, Semiring::Prob),
        }
    }

    #[test]
    fn projections_decompose(
        (sr, m) in any_semiring().prop_flat_map(|sr| (Just(sr), weighting(sr))),
        k in 0i64..3,
    ) {
        let yes = m.project(|s| Ok::<_, ()>(s.get("x").unwrap() <= &rat_int(k))).unwrap();
        let no = m.project(|s| Ok::<_, ()>(s.get("x").unwrap() > &rat_int(k))).unwrap();
        let rebuilt = yes.wsum(&no).unwrap().wsum(&Weighting::div(sr, m.div_weight())).unwrap();
        prop_assert_eq!(rebuilt, m);
    }

    #[test]
    fn fusion_order_is_a_partial_order(
        (a, b, c) in any_semiring().prop_flat_map(|sr| (weighting(sr), weighting(sr), weighting(sr)))
    ) {
        prop_assert!(a.fusion_leq(&a));
        if a.fusion_leq(&b) && b.fusion_leq(&a) {
            prop_assert_eq!(&a, &b);
        }
        if a.fusion_leq(&b) && b.fusion_leq(&c) {
            prop_assert!(a.fusion_leq(&c));
        }
    }
}

fn random_program(seed: u64) -> Command {
    random_command(&mut ChaCha8Rng::seed_from_u64(seed), &GenConfig::default())
}

fn cfg() -> EvalConfig {
    EvalConfig::new(64, 4).unwrap()
}

fn domain() -> FiniteDomain {
    FiniteDomain::parse("x:0..3, y:0..3").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn desugaring_is_idempotent_and_total(seed in any::<u64>()) {
        let c = random_program(seed);
        let d = c.desugar().unwrap();
        prop_assert!(d.is_sugar_free());
        prop_assert_eq!(d.desugar().unwrap(), d);
    }

    #[test]
    fn printing_then_parsing_is_the_identity(seed in any::<u64>()) {
        let c = random_program(seed).desugar().unwrap();
        let p = parse_program(&format!("vars x, y\n{c}")).unwrap();
        prop_assert_eq!(p.body, c);
    }

    #[test]
    fn divergence_passes_through(seed in any::<u64>()) {
        let c = random_program(seed);
        let m = Weighting::unit(Semiring::Bool, Outcome::Div);
        let r = eval_command(&c, &m, &cfg()).unwrap();
        prop_assert_eq!(r.exact_weighting(), Some(&m));
    }

    #[test]
    fn kleene_chain_ascends(seed in any::<u64>(), x0 in 0i64..4, y0 in 0i64..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gc = GenConfig::default();
        let body = random_command(&mut rng, &gc);
        let b = random_predicate(&mut rng, &gc);
        let s = State::from_pairs([("x", rat_int(x0)), ("y", rat_int(y0))]);
        let (e1, e2) = (Guard::Bool(b.clone()), Guard::Bool(BExpr::not(b)));
        let chain = lfp_iterate(&body, &e1, &e2, &s, 8, Semiring::Bool, &cfg()).unwrap();
        for w in chain.windows(2) {
            prop_assert!(w[0].fusion_leq(&w[1]), "{} then {}", w[0], w[1]);
        }
    }

    #[test]
    fn probabilistic_loops_conserve_mass(n in 1i64..8, d in 2i64..9, bound in 1i64..6) {
        let p = rat(n.min(d - 1), d);
        let src = format!("vars x\nwhile x < {bound} do (x := x + 1 +[{p}] x := x + 2)");
        let prog = parse_program(&src).unwrap();
        let Command::Iter(body, e1, e2) = prog.core().unwrap() else { unreachable!() };
        let sr = Semiring::Prob;
        let mut u = Unroller::new(&body, &e1, &e2, &Weighting::unit_state(sr, x(0)), &cfg()).unwrap();
        for _ in 0..10 {
            let a = u.approx();
            let total = sr.add(&a.collected.mass().unwrap(), &a.residual.mass(sr)).unwrap();
            prop_assert_eq!(total, sr.one());
            u.force_step().unwrap();
        }
    }

    #[test]
    fn transformers_are_ordered_and_dual(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gc = GenConfig::default();
        let c = random_command(&mut rng, &gc);
        let q = random_predicate(&mut rng, &gc);
        let d = domain();
        let wlp = wlp_box(&c, &q, &d, &cfg()).unwrap();
        prop_assert!(wp_total(&c, &q, &d, &cfg()).unwrap().is_subset(&wlp));
        let wpp = wpp_diamond(&c, &q, &d, &cfg()).unwrap();
        prop_assert!(wpp.is_subset(&wlpp(&c, &q, &d, &cfg()).unwrap()));
        let dual = wlp_box(&c, &BExpr::not(q), &d, &cfg()).unwrap();
        for s in d.states() {
            prop_assert_eq!(wpp.contains(&s), !dual.contains(&s));
        }
    }

    #[test]
    fn valid_triples_bound_the_strongest_post(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gc = GenConfig::default();
        let c = random_command(&mut rng, &gc);
        let (p, q) = (random_predicate(&mut rng, &gc), random_predicate(&mut rng, &gc));
        let d = domain();
        let post = Assertion::Box(q.clone());
        let v = check_triple(&Assertion::atom(p.clone()), &c, &post, &Generator::Domain(d.clone()), Semiring::Bool,
            &TripleConfig::default()).unwrap();
        if v.is_valid() {
            for s in d.states().into_iter().filter(|s| tol::lang::eval_bool(&p, s).unwrap()) {
                let r = eval_command(&c, &Weighting::unit_state(Semiring::Bool, s), &cfg()).unwrap();
                for (o, _) in r.known.iter() {
                    if let Outcome::State(t) = o {
                        prop_assert!(tol::lang::eval_bool(&q, t).unwrap(), "{c}: {t} escapes {q}");
                    }
                }
            }
        }
    }
}

#[test]
fn boolean_tests_are_homomorphic() {
    use tol::lang::eval_test;
    let sr = Semiring::Bool;
    let s = x(0);
    let lit = |b: bool| if b { BExpr::True } else { BExpr::False };
    for a in [false, true] {
        let na = eval_test(sr, &BExpr::not(lit(a)), &s).unwrap();
        assert_eq!(na, Weight::Bool(!a));
        for b in [false, true] {
            let (wa, wb) = (Weight::Bool(a), Weight::Bool(b));
            let or = BExpr::Or(Box::new(lit(a)), Box::new(lit(b)));
            let and = BExpr::And(Box::new(lit(a)), Box::new(lit(b)));
            assert_eq!(eval_test(sr, &or, &s).unwrap(), sr.add(&wa, &wb).unwrap());
            assert_eq!(eval_test(sr, &and, &s).unwrap(), sr.mul(&wa, &wb));
        }
    }
}
