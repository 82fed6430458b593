//! Executable law suites: semiring axioms, the weighting monad, the
//! interaction of the Kleisli extension with sums and scalars, projection,
//! the fusion order and the duality of the modalities.
//!
//! Boolean suites enumerate every case over a two-state space. Other
//! semirings are sampled from a seeded generator over three states.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assertions::{satisfies, Assertion, Scope, Truth};
use crate::lang::{eval_bool, parse_bexpr, BExpr, LangError, State};
use crate::semiring::{rat, rat_int, Semiring, Weight};
use crate::weighting::{Outcome, Weighting, WeightingError};

/// Outcome of one law suite.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub semiring: String,
    pub checked: usize,
    pub failed: usize,
    /// The first few counterexamples.
    pub failures: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failed == 0
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "ok" } else { "FAILED" };
        write!(
            f,
            "{:<14} {:<8} {:>7} checked, {} failed  {status}",
            self.suite, self.semiring, self.checked, self.failed
        )?;
        for c in &self.failures {
            write!(f, "\n    {c}")?;
        }
        Ok(())
    }
}

const KEPT_FAILURES: usize = 8;

struct Suite {
    report: SuiteReport,
}

impl Suite {
    fn new(name: &str, sr: Semiring) -> Suite {
        Suite {
            report: SuiteReport {
                suite: name.into(),
                semiring: sr.name().into(),
                checked: 0,
                failed: 0,
                failures: Vec::new(),
            },
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.report.checked += 1;
        if !ok {
            self.report.failed += 1;
            if self.report.failures.len() < KEPT_FAILURES {
                self.report.failures.push(what());
            }
        }
    }

    fn eq<T: PartialEq + fmt::Display, E: fmt::Display>(&mut self, law: &str, lhs: Result<T, E>, rhs: Result<T, E>) {
        match (lhs, rhs) {
            (Ok(a), Ok(b)) => {
                let ok = a == b;
                self.check(ok, || format!("{law}: {a} != {b}"));
            }
            (Err(_), Err(_)) => {}
            (Ok(_), Err(e)) | (Err(e), Ok(_)) => self.check(false, || format!("{law}: only one side is defined ({e})")),
        }
    }
}

type WResult = Result<Weighting, WeightingError>;

/// A state-to-weighting function given by its table over `x = 0, 1, ...`.
#[derive(Clone, Debug)]
struct Kernel(Vec<Weighting>);

impl Kernel {
    fn at(&self, s: &State) -> WResult {
        let i = s.get("x").and_then(|q| q.to_integer().try_into().ok()).unwrap_or(usize::MAX);
        self.0.get(i).cloned().ok_or_else(|| WeightingError::Parse(format!("kernel undefined at {s}")))
    }

    fn sum(&self, other: &Kernel) -> Option<Kernel> {
        self.0.iter().zip(&other.0).map(|(a, b)| a.wsum(b).ok()).collect::<Option<Vec<_>>>().map(Kernel)
    }

    /// Pointwise fusion order.
    fn leq(&self, other: &Kernel) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a.fusion_leq(b))
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().enumerate().map(|(i, m)| format!("x={i} -> {m}")).collect();
        write!(f, "[{}]", parts.join("; "))
    }
}

fn bind(m: &Weighting, f: &Kernel) -> WResult {
    m.kleisli_extend(|s| f.at(s))
}

fn states(n: usize) -> Vec<State> {
    (0..n).map(|i| State::from_pairs([("x", rat_int(i as i64))])).collect()
}

fn outcomes(n: usize) -> Vec<Outcome> {
    states(n).into_iter().map(Outcome::State).chain([Outcome::Div]).collect()
}

/// Every Boolean weighting over the given outcomes.
fn all_bool(outs: &[Outcome]) -> Vec<Weighting> {
    let sr = Semiring::Bool;
    (0..1u32 << outs.len())
        .map(|bits| {
            let entries =
                outs.iter().enumerate().filter(|(i, _)| bits >> i & 1 == 1).map(|(_, o)| (o.clone(), sr.one()));
            Weighting::from_entries(sr, entries).expect("boolean weighting")
        })
        .collect()
}

fn all_bool_kernels(n: usize) -> Vec<Kernel> {
    let ws = all_bool(&outcomes(n));
    let mut acc = vec![Vec::new()];
    for _ in 0..n {
        acc = acc
            .into_iter()
            .flat_map(|k: Vec<Weighting>| ws.iter().map(move |w| [k.clone(), vec![w.clone()]].concat()))
            .collect();
    }
    acc.into_iter().map(Kernel).collect()
}

struct Gen {
    sr: Semiring,
    rng: ChaCha8Rng,
}

impl Gen {
    fn weight(&mut self) -> Weight {
        match self.sr {
            Semiring::Bool => Weight::Bool(self.rng.gen()),
            Semiring::Prob => {
                let d = self.rng.gen_range(1..=12);
                Weight::Rat(rat(self.rng.gen_range(0..=d), d))
            }
            Semiring::Nat => Weight::nat(self.rng.gen_range(0..=20)),
            Semiring::NatInf => {
                if self.rng.gen_ratio(1, 8) {
                    Weight::Inf
                } else {
                    Weight::nat(self.rng.gen_range(0..=20))
                }
            }
        }
    }

    /// A random weighting; probabilistic ones have mass at most one, or
    /// exactly one when `full`.
    fn weighting(&mut self, outs: &[Outcome], full: bool) -> Weighting {
        let sr = self.sr;
        if sr != Semiring::Prob {
            loop {
                let mut entries = Vec::new();
                for o in outs {
                    if self.rng.gen_ratio(2, 3) {
                        entries.push((o.clone(), self.weight()));
                    }
                }
                let m = Weighting::from_entries(sr, entries).expect("total carrier");
                if !full || !m.is_empty() {
                    return m;
                }
            }
        }
        let mut nums: Vec<i64> =
            outs.iter().map(|_| if self.rng.gen_ratio(1, 3) { 0 } else { self.rng.gen_range(1..=4) }).collect();
        if full && nums.iter().all(|n| *n == 0) {
            let i = self.rng.gen_range(0..nums.len());
            nums[i] = 1;
        }
        let total: i64 = nums.iter().sum();
        let denom = if full { total } else { total + self.rng.gen_range(0..=3) };
        if denom == 0 {
            return Weighting::empty(sr);
        }
        let entries = outs.iter().zip(&nums).map(|(o, n)| (o.clone(), Weight::Rat(rat(*n, denom))));
        Weighting::from_entries(sr, entries).expect("mass at most one")
    }

    fn state_weighting(&mut self, n: usize, full: bool) -> Weighting {
        let outs: Vec<Outcome> = states(n).into_iter().map(Outcome::State).collect();
        self.weighting(&outs, full)
    }

    fn kernel(&mut self, n: usize, full: bool) -> Kernel {
        let outs = outcomes(n);
        Kernel((0..n).map(|_| self.weighting(&outs, full)).collect())
    }

    /// A weighting above `m` in the fusion order: part of the divergence
    /// weight moves to a state.
    fn raise(&mut self, m: &Weighting, n: usize) -> Weighting {
        let sr = self.sr;
        let d = m.div_weight();
        let moved = match (&d, sr) {
            (Weight::Rat(q), _) => Weight::Rat(q * rat(self.rng.gen_range(0..=2), 2)),
            (Weight::Bool(b), _) => Weight::Bool(*b && self.rng.gen()),
            _ => return self.extend(m, n),
        };
        let target = Outcome::State(states(n)[self.rng.gen_range(0..n)].clone());
        let mut out = m.clone();
        if let (Weight::Rat(q), Weight::Rat(k)) = (&d, &moved) {
            out.set(Outcome::Div, Weight::Rat(q - k));
        } else if moved == sr.one() && self.rng.gen() {
            out.set(Outcome::Div, sr.zero());
        }
        let w = sr.add(&out.get(&target), &moved).expect("moved mass stays bounded");
        out.set(target, w);
        out
    }

    /// Adds weight to a state without touching divergence.
    fn extend(&mut self, m: &Weighting, n: usize) -> Weighting {
        let extra = self.state_weighting(n, false);
        m.wsum(&extra).unwrap_or_else(|_| m.clone())
    }
}

/// Semiring axioms on every triple of elements (Boolean) or `iters` samples.
pub fn semiring_laws(sr: Semiring, iters: usize, seed: u64) -> SuiteReport {
    let mut s = Suite::new("semiring", sr);
    let triples: Vec<[Weight; 3]> = if sr == Semiring::Bool {
        let es = sr.sample_elements();
        let mut v = Vec::new();
        for a in &es {
            for b in &es {
                for c in &es {
                    v.push([a.clone(), b.clone(), c.clone()]);
                }
            }
        }
        v
    } else {
        let mut g = Gen { sr, rng: ChaCha8Rng::seed_from_u64(seed) };
        (0..iters).map(|_| [g.weight(), g.weight(), g.weight()]).collect()
    };
    let (zero, one) = (sr.zero(), sr.one());
    for [a, b, c] in &triples {
        let add = |x: &Weight, y: &Weight| sr.add(x, y);
        s.eq("a+(b+c) = (a+b)+c", add(b, c).and_then(|bc| add(a, &bc)), add(a, b).and_then(|ab| add(&ab, c)));
        s.eq("a+b = b+a", add(a, b), add(b, a));
        s.eq("a+0 = a", add(a, &zero), Ok(a.clone()));
        s.eq("a(bc) = (ab)c", Ok::<_, String>(sr.mul(a, &sr.mul(b, c))), Ok(sr.mul(&sr.mul(a, b), c)));
        s.eq("1a = a", Ok::<_, String>(sr.mul(&one, a)), Ok(a.clone()));
        s.eq("a1 = a", Ok::<_, String>(sr.mul(a, &one)), Ok(a.clone()));
        if let Ok(bc) = add(b, c) {
            s.eq("a(b+c) = ab+ac", Ok(sr.mul(a, &bc)), add(&sr.mul(a, b), &sr.mul(a, c)));
            s.eq("(b+c)a = ba+ca", Ok(sr.mul(&bc, a)), add(&sr.mul(b, a), &sr.mul(c, a)));
        }
        s.eq("0a = 0", Ok::<_, String>(sr.mul(&zero, a)), Ok(zero.clone()));
        s.eq("a0 = 0", Ok::<_, String>(sr.mul(a, &zero)), Ok(zero.clone()));
    }
    s.report
}

/// Cases for the monad suites: weightings, kernels and the state space size.
struct Cases {
    n: usize,
    ms: Vec<Weighting>,
    ks: Vec<Kernel>,
}

fn cases(sr: Semiring, iters: usize, seed: u64) -> (Cases, Option<Gen>) {
    if sr == Semiring::Bool {
        return (Cases { n: 2, ms: all_bool(&outcomes(2)), ks: all_bool_kernels(2) }, None);
    }
    let mut g = Gen { sr, rng: ChaCha8Rng::seed_from_u64(seed) };
    let (n, pool) = (3, iters.clamp(4, 24));
    let outs = outcomes(n);
    let ms = (0..pool).map(|_| g.weighting(&outs, false)).collect();
    let ks = (0..pool).map(|_| g.kernel(n, false)).collect();
    (Cases { n, ms, ks }, Some(g))
}

/// Unit and associativity laws of the Kleisli extension.
pub fn monad_laws(sr: Semiring, iters: usize, seed: u64) -> SuiteReport {
    let mut s = Suite::new("monad", sr);
    let (c, mut g) = cases(sr, iters, seed);
    let unit = |st: &State| Ok::<_, WeightingError>(Weighting::unit_state(sr, st.clone()));
    for m in &c.ms {
        s.eq("unit^+(m) = m", m.kleisli_extend(unit), Ok(m.clone()));
    }
    for f in &c.ks {
        for st in states(c.n) {
            s.eq("f^+(unit(s)) = f(s)", bind(&Weighting::unit_state(sr, st.clone()), f), f.at(&st));
        }
    }
    let assoc = |m: &Weighting, f: &Kernel, g2: &Kernel, s: &mut Suite| {
        let lhs = bind(m, g2).and_then(|x| bind(&x, f));
        let rhs = m.kleisli_extend(|st| bind(&g2.at(st)?, f));
        s.eq("f^+(g^+(m)) = (f^+ . g)^+(m)", lhs, rhs);
    };
    match g.as_mut() {
        None => {
            for m in &c.ms {
                for f in &c.ks {
                    for g2 in &c.ks {
                        assoc(m, f, g2, &mut s);
                    }
                }
            }
        }
        Some(gen) => {
            let outs = outcomes(c.n);
            for _ in 0..iters {
                let (m, f, g2) = (gen.weighting(&outs, false), gen.kernel(c.n, false), gen.kernel(c.n, false));
                assoc(&m, &f, &g2, &mut s);
            }
        }
    }
    s.report
}

/// How the Kleisli extension distributes over sums, scalars and divergence.
pub fn bind_effect_laws(sr: Semiring, iters: usize, seed: u64) -> SuiteReport {
    let mut s = Suite::new("bind-effects", sr);
    let (c, g) = cases(sr, iters, seed);
    let div = Weighting::unit(sr, Outcome::Div);
    let scalars =
        if sr == Semiring::Bool { sr.sample_elements() } else { sr.sample_elements().into_iter().take(5).collect() };
    let pairs: Vec<(usize, usize)> = match g {
        None => (0..c.ms.len()).flat_map(|i| (0..c.ms.len()).map(move |j| (i, j))).collect(),
        Some(mut gen) => {
            (0..iters).map(|_| (gen.rng.gen_range(0..c.ms.len()), gen.rng.gen_range(0..c.ms.len()))).collect()
        }
    };
    let kpairs: Vec<(usize, usize)> =
        pairs.iter().map(|(i, j)| (i % c.ks.len(), (i * 7 + j * 13) % c.ks.len())).collect();
    for (idx, (i, j)) in pairs.iter().enumerate() {
        let (m, m2) = (&c.ms[*i], &c.ms[*j]);
        let (f, g2) = (&c.ks[kpairs[idx].0], &c.ks[kpairs[idx].1]);
        if let Ok(sum) = m.wsum(m2) {
            let rhs = bind(m, f).and_then(|a| a.wsum(&bind(m2, f)?));
            s.eq("f^+(m + m') = f^+(m) + f^+(m')", bind(&sum, f), rhs);
        }
        if !m.has_div() {
            if let Some(fg) = f.sum(g2) {
                let rhs = bind(m, f).and_then(|a| a.wsum(&bind(m, g2)?));
                s.eq("(f + g)^+(m) = f^+(m) + g^+(m)", bind(m, &fg), rhs);
            }
        }
        for u in &scalars {
            s.eq("f^+(u m) = u f^+(m)", bind(&m.scale_left(u), f), bind(m, f).map(|x| x.scale_left(u)));
            if !m.has_div() {
                s.eq("f^+(m u) = f^+(m) u", bind(&m.scale_right(u), f), bind(m, f).map(|x| x.scale_right(u)));
            }
        }
    }
    for f in &c.ks {
        s.eq("f^+(unit(DIV)) = unit(DIV)", bind(&div, f), Ok(div.clone()));
    }
    s.report
}

fn predicates() -> Vec<BExpr> {
    ["tru", "fls", "x = 0", "x = 1", "x <= 1", "x >= 1"]
        .iter()
        .map(|t| parse_bexpr(t).expect("fixed predicate"))
        .collect()
}

/// `b?m + ¬b?m + m(DIV)·unit(DIV) = m`.
pub fn projection_laws(sr: Semiring, iters: usize, seed: u64) -> SuiteReport {
    let mut s = Suite::new("projection", sr);
    let (c, _) = cases(sr, iters, seed);
    for b in predicates() {
        let nb = BExpr::not(b.clone());
        for m in &c.ms {
            let keep = m.project(|st| eval_bool(&b, st));
            let drop = m.project(|st| eval_bool(&nb, st));
            let rebuilt = keep.and_then(|k| Ok::<_, LangError>((k, drop?))).map(|(k, d)| {
                k.wsum(&d).and_then(|x| x.wsum(&Weighting::div(sr, m.div_weight()))).map_err(|e| e.to_string())
            });
            let rebuilt = rebuilt.map_err(|e| e.to_string()).and_then(|r| r);
            s.eq(&format!("{b}?m + ~{b}?m + DIV = m"), rebuilt, Ok(m.clone()));
        }
    }
    s.report
}

/// Partial-order axioms of the fusion order and monotonicity of the
/// Kleisli extension in its kernel. For probabilistic weightings of full
/// mass it is also monotone in its argument.
pub fn fusion_laws(sr: Semiring, iters: usize, seed: u64) -> SuiteReport {
    let mut s = Suite::new("fusion-order", sr);
    let mut gen = Gen { sr, rng: ChaCha8Rng::seed_from_u64(seed) };
    let (n, pool) = if sr == Semiring::Bool {
        (2, all_bool(&outcomes(2)))
    } else {
        let outs = outcomes(3);
        let mut pool = Vec::new();
        for _ in 0..iters.clamp(4, 16) {
            let m = gen.weighting(&outs, false);
            let up = gen.raise(&m, 3);
            pool.push(m);
            pool.push(up);
        }
        (3, pool)
    };
    for a in &pool {
        s.check(a.fusion_leq(a), || format!("reflexivity fails at {a}"));
        for b in &pool {
            let ab = a.fusion_leq(b);
            if ab && b.fusion_leq(a) {
                s.check(a == b, || format!("antisymmetry fails at {a}, {b}"));
            }
            if ab {
                for c in &pool {
                    if b.fusion_leq(c) {
                        s.check(a.fusion_leq(c), || format!("transitivity fails at {a}, {b}, {c}"));
                    }
                }
            }
        }
    }
    let rounds = if sr == Semiring::Bool { 256 } else { iters };
    for _ in 0..rounds {
        let f = gen.kernel(n, false);
        let g = Kernel(f.0.iter().map(|w| gen.raise(w, n)).collect());
        let m = gen.weighting(&outcomes(n), false);
        if f.leq(&g) {
            match (bind(&m, &f), bind(&m, &g)) {
                (Ok(a), Ok(b)) => {
                    s.check(a.fusion_leq(&b), || format!("f <= g but f^+(m) = {a} is not below g^+(m) = {b}"))
                }
                (a, b) => s.check(a.is_err() && b.is_err(), || "monotonicity: one side undefined".into()),
            }
        }
        if sr == Semiring::Prob {
            let m = gen.weighting(&outcomes(n), true);
            let up = gen.raise(&m, n);
            if let (Ok(a), Ok(b)) = (bind(&m, &f), bind(&up, &f)) {
                s.check(a.fusion_leq(&b), || format!("m <= m' but f^+(m) = {a} is not below f^+(m') = {b}"));
            }
        }
    }
    s.report
}

/// `dia P = ~box ~P` and `diaP P = ~boxT ~P`, over every Boolean weighting on two states.
pub fn duality_laws() -> SuiteReport {
    let sr = Semiring::Bool;
    let mut s = Suite::new("modal-duality", sr);
    let scope = Scope::new(sr);
    let sat = |m: &Weighting, a: &Assertion| match satisfies(m, a, &scope) {
        Truth::Yes => Some(true),
        Truth::No => Some(false),
        Truth::Unknown(_) => None,
    };
    for m in all_bool(&outcomes(2)) {
        for p in predicates() {
            let np = BExpr::not(p.clone());
            let pairs = [
                ("dia P = ~box ~P", Assertion::Dia(p.clone()), Assertion::Box(np.clone())),
                ("box P = ~dia ~P", Assertion::Box(p.clone()), Assertion::Dia(np.clone())),
                ("diaP P = ~boxT ~P", Assertion::DiaP(p.clone()), Assertion::BoxT(np.clone())),
                ("boxT P = ~diaP ~P", Assertion::BoxT(p.clone()), Assertion::DiaP(np.clone())),
            ];
            for (law, a, b) in pairs {
                let (x, y) = (sat(&m, &a), sat(&m, &b));
                s.check(x.is_some() && y.is_some() && x != y, || {
                    format!("{law} fails at {m} with P = {p}: {x:?} vs {y:?}")
                });
            }
        }
    }
    s.report
}

/// Every suite for `sr`; the duality suite always runs over the Boolean semiring.
pub fn run_laws(sr: Semiring, iters: usize, seed: u64) -> Vec<SuiteReport> {
    vec![
        semiring_laws(sr, iters, seed),
        monad_laws(sr, iters, seed),
        bind_effect_laws(sr, iters, seed),
        projection_laws(sr, iters, seed),
        fusion_laws(sr, iters, seed),
        duality_laws(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boolean_suites_pass_exhaustively() {
        for r in run_laws(Semiring::Bool, 0, 0) {
            assert!(r.passed(), "{r}");
            assert!(r.checked > 0, "{r}");
        }
    }

    #[test]
    fn sampled_suites_pass() {
        for sr in [Semiring::Prob, Semiring::Nat, Semiring::NatInf] {
            for r in run_laws(sr, 200, 7) {
                assert!(r.passed(), "{r}");
            }
        }
    }

    #[test]
    fn exhaustive_kernels_cover_every_table() {
        assert_eq!(all_bool_kernels(2).len(), 64);
        assert_eq!(all_bool(&outcomes(2)).len(), 8);
    }
}
