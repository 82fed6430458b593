//! Whole-corpus checks of the proof checker against the triple checker.

use std::path::Path;

use tol::proofs::{check_proof, CheckConfig, Proof};
use tol::semiring::Semiring;
use tol::transformers::{check_triple, Generator, TripleConfig};

const PROOFS: [&str; 8] =
    ["geometric", "counter", "nt", "mallocdiv", "countdown", "tortoise", "partition2", "partition3"];

fn load(name: &str) -> Proof {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(format!("{name}.proof"));
    Proof::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn accepted_roots_are_valid_triples() {
    let mut checked = 0;
    for name in PROOFS {
        let p = load(name);
        let r = check_proof(&p, &CheckConfig::default());
        assert!(r.is_accepted(), "{name}:\n{r}");
        let (Semiring::Bool, Some(d)) = (p.semiring, &p.domain) else { continue };
        let root = &p.root;
        let v = check_triple(
            &root.pre,
            &root.prog,
            &root.post,
            &Generator::Domain(d.clone()),
            p.semiring,
            &TripleConfig::default(),
        )
        .unwrap();
        assert!(v.is_valid(), "{name}: {v}");
        checked += 1;
    }
    assert_eq!(checked, 5);
}

#[test]
fn raising_the_index_bound_never_adds_obligations() {
    for name in PROOFS {
        let p = load(name);
        let mut prev = usize::MAX;
        for ncheck in [2, 4, 8, 16, 32] {
            let r = check_proof(&p, &CheckConfig { ncheck, ..CheckConfig::default() });
            assert!(r.obligations.len() <= prev, "{name}: ncheck {ncheck} adds obligations:\n{r}");
            prev = r.obligations.len();
        }
    }
}
