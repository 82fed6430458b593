//! Triple verdicts against transformer inclusions on seeded random programs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tol::semantics::EvalConfig;
use tol::transformers::{
    random_command, random_predicate, subsumption_oracle, FiniteDomain, GenConfig, Theorem, TripleConfig,
};

const SEED: u64 = 2024;
const PROGRAMS: usize = 500;

#[test]
fn triples_and_transformers_agree_on_random_programs() {
    eprintln!("seed {SEED}");
    let d = FiniteDomain::parse("x:0..3, y:0..3").unwrap();
    let cfg = TripleConfig { eval: EvalConfig::new(64, 4).unwrap(), ..TripleConfig::default() };
    let gc = GenConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut disagreements = Vec::new();
    for i in 0..PROGRAMS {
        let c = random_command(&mut rng, &gc);
        let p = random_predicate(&mut rng, &gc);
        let q = random_predicate(&mut rng, &gc);
        for t in Theorem::ALL {
            let r = subsumption_oracle(t, &c, &p, &q, &d, &cfg).unwrap();
            if r.agrees() != Some(true) {
                disagreements.push(format!("#{i} {t:?}: {c} / {p} / {q}: {r:?}"));
            }
        }
    }
    assert!(disagreements.is_empty(), "{}", disagreements.join("\n"));
}
