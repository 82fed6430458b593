//! Entailments between assertions, predicates and guards.

use super::sat::holds;
use super::{is_zero_weight, satisfies, Assertion, Scope, Truth, WExpr};
use crate::lang::{eval_test, BExpr, CmpOp, Expr, Guard, State};
use crate::semiring::{Semiring, Weight};
use crate::weighting::{Outcome, Weighting};

/// Largest Boolean state space whose weightings are enumerated outright.
const BOOL_ENUM_STATES: usize = 11;

/// Decides `P ⇒ Q` when possible: syntactically, by the point fixed by
/// equalities in `P`, by linear arithmetic, over the declared domain, or by a
/// pool counterexample.
pub fn pred_implies(p: &BExpr, q: &BExpr, scope: &Scope) -> Option<bool> {
    if *q == BExpr::True || *p == BExpr::False || p == q {
        return Some(true);
    }
    let have = p.conjuncts();
    if q.conjuncts().iter().all(|c| have.contains(c)) {
        return Some(true);
    }
    if let Some(s) = pinned_state(p) {
        match (holds(p, &s), holds(q, &s)) {
            (Ok(false), _) => return Some(true),
            (Ok(true), Ok(v)) => return Some(v),
            _ => {}
        }
    }
    if super::linear::proves_implication(p, q) {
        return Some(true);
    }
    if let Some(dom) = &scope.domain {
        let mut decided = true;
        for s in dom.states() {
            match (holds(p, &s), holds(q, &s)) {
                (Ok(true), Ok(false)) => return Some(false),
                (Ok(_), Ok(_)) | (Ok(false), Err(_)) => {}
                _ => decided = false,
            }
        }
        if decided {
            return Some(true);
        }
    }
    for s in &scope.pool {
        if let (Ok(true), Ok(false)) = (holds(p, s), holds(q, s)) {
            return Some(false);
        }
    }
    None
}

/// The state fixed by `x = c` conjuncts, if every variable of `p` is fixed.
fn pinned_state(p: &BExpr) -> Option<State> {
    let mut s = State::new();
    for c in p.conjuncts() {
        if let BExpr::Cmp(CmpOp::Eq, a, b) = c {
            match (a, b) {
                (Expr::Var(v), Expr::Num(q)) | (Expr::Num(q), Expr::Var(v)) => {
                    if s.get(v).is_some_and(|old| old != q) {
                        return None;
                    }
                    s.set(v, q.clone());
                }
                _ => {}
            }
        }
    }
    let mut vars = Default::default();
    p.free_vars(&mut vars);
    vars.iter().all(|v: &String| s.get(v).is_some()).then_some(s)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Entailment {
    /// Every satisfying weighting terminates and the guard is this constant on its support.
    Exact(Weight),
    No,
    Unknown(String),
}

/// Guard value over the states an assertion admits; `Vacuous` when none.
#[derive(Clone, Debug, PartialEq, Eq)]
enum GuardVal {
    Vacuous,
    Exact(Weight),
    No,
    Unknown(String),
}

impl GuardVal {
    fn join(self, other: GuardVal) -> GuardVal {
        use GuardVal as G;
        match (self, other) {
            (G::No, _) | (_, G::No) => G::No,
            (G::Unknown(r), _) | (_, G::Unknown(r)) => G::Unknown(r),
            (G::Vacuous, x) | (x, G::Vacuous) => x,
            (G::Exact(a), G::Exact(b)) if a == b => G::Exact(a),
            _ => G::No,
        }
    }

    fn meet(self, other: GuardVal) -> GuardVal {
        use GuardVal as G;
        match (self, other) {
            (G::Vacuous, _) | (_, G::Vacuous) => G::Vacuous,
            (G::Exact(a), G::Exact(b)) if a != b => G::Vacuous,
            (G::Exact(a), _) | (_, G::Exact(a)) => G::Exact(a),
            (G::Unknown(r), _) | (_, G::Unknown(r)) => G::Unknown(r),
            (G::No, G::No) => G::Unknown("neither conjunct fixes the guard".into()),
        }
    }
}

fn guard_on_pred(p: &BExpr, e: &Guard, scope: &Scope) -> GuardVal {
    let sr = scope.sr;
    let b = match e {
        Guard::Const(w) => return GuardVal::Exact(w.clone()),
        Guard::Bool(b) => b,
    };
    if *p == BExpr::False {
        return GuardVal::Vacuous;
    }
    match (pred_implies(p, b, scope), pred_implies(p, &BExpr::not(b.clone()), scope)) {
        (Some(true), Some(true)) => GuardVal::Vacuous,
        (Some(true), _) => GuardVal::Exact(sr.one()),
        (_, Some(true)) => GuardVal::Exact(sr.zero()),
        (Some(false), Some(false)) => GuardVal::No,
        _ => GuardVal::Unknown(format!("cannot relate `{p}` to the guard `{b}`")),
    }
}

fn may_be_nonzero(u: &WExpr) -> bool {
    !is_zero_weight(u)
}

fn guard_val(phi: &Assertion, e: &Guard, scope: &Scope) -> GuardVal {
    use Assertion as A;
    match phi {
        A::Bot => GuardVal::Vacuous,
        A::Atom(p, u) if may_be_nonzero(u) => guard_on_pred(p, e, scope),
        A::Atom(..) | A::Div(_) if phi.is_nothing() => GuardVal::Vacuous,
        A::Div(_) | A::Top | A::Box(_) | A::Dia(_) | A::DiaP(_) | A::AlwaysDiv | A::SometimesDiv => GuardVal::No,
        A::SuppIn(p, false) | A::BoxT(p) => guard_on_pred(p, e, scope),
        A::SuppIn(..) | A::SuppMeets(..) => GuardVal::No,
        A::OPlus(xs) => xs.iter().fold(GuardVal::Vacuous, |acc, x| acc.join(guard_val(x, e, scope))),
        A::Or(x, y) => guard_val(x, e, scope).join(guard_val(y, e, scope)),
        A::And(x, y) => guard_val(x, e, scope).meet(guard_val(y, e, scope)),
        A::ScaleL(u, x) | A::ScaleR(x, u) => {
            if is_zero_weight(u) {
                GuardVal::Vacuous
            } else {
                guard_val(x, e, scope)
            }
        }
        A::ExistsFin(k, lo, hi, x) => {
            (*lo..*hi).fold(GuardVal::Vacuous, |acc, i| acc.join(guard_val(&x.instantiate(k, i), e, scope)))
        }
        A::ExistsWeight { body, .. } => guard_val(body, e, scope),
        A::Singleton(es) => {
            let mut acc = GuardVal::Vacuous;
            for (o, w) in es {
                let w = match w.eval(scope.sr) {
                    Ok(w) => w,
                    Err(err) => return GuardVal::Unknown(err.to_string()),
                };
                if scope.sr.is_zero(&w) {
                    continue;
                }
                let v = match o {
                    Outcome::Div => GuardVal::No,
                    Outcome::State(s) => match e {
                        Guard::Const(c) => GuardVal::Exact(c.clone()),
                        Guard::Bool(b) => match eval_test(scope.sr, b, s) {
                            Ok(v) => GuardVal::Exact(v),
                            Err(err) => GuardVal::Unknown(err.to_string()),
                        },
                    },
                };
                acc = acc.join(v);
            }
            acc
        }
        other => GuardVal::Unknown(format!("no guard entailment procedure for `{other}`")),
    }
}

/// Decides `φ ⊨ e = u`. An assertion admitting only the zero weighting
/// entails every value and is reported with the semiring's one.
pub fn entails_guard(phi: &Assertion, e: &Guard, scope: &Scope) -> Entailment {
    match guard_val(&phi.normalize(), e, scope) {
        GuardVal::Vacuous => Entailment::Exact(scope.sr.one()),
        GuardVal::Exact(w) => Entailment::Exact(w),
        GuardVal::No => Entailment::No,
        GuardVal::Unknown(r) => Entailment::Unknown(r),
    }
}

/// Decides `φ ⊨ e = u` for a given `u`, accepting assertions with no states.
pub fn entails_guard_value(phi: &Assertion, e: &Guard, u: &Weight, scope: &Scope) -> Truth {
    match guard_val(&phi.normalize(), e, scope) {
        GuardVal::Vacuous => Truth::Yes,
        GuardVal::Exact(w) => Truth::from_bool(w == *u),
        GuardVal::No => Truth::No,
        GuardVal::Unknown(r) => Truth::Unknown(r),
    }
}

/// Whether every weighting satisfying `φ` is supported on divergence only.
/// Decided syntactically; `false` means not established.
pub fn is_nonterminating(phi: &Assertion) -> bool {
    use Assertion as A;
    match phi {
        A::Bot | A::Div(_) | A::AlwaysDiv => true,
        A::Atom(p, u) => is_zero_weight(u) || *p == BExpr::False,
        A::SuppIn(p, _) | A::Box(p) | A::BoxT(p) => *p == BExpr::False,
        A::ScaleL(_, x) | A::ScaleR(x, _) => is_nonterminating(x),
        A::OPlus(xs) => xs.iter().all(is_nonterminating),
        A::Or(x, y) => is_nonterminating(x) && is_nonterminating(y),
        A::And(x, y) => is_nonterminating(x) || is_nonterminating(y),
        A::ExistsFin(k, lo, hi, x) => (*lo..*hi).all(|i| is_nonterminating(&x.instantiate(k, i))),
        A::ExistsNat(_, x) | A::ExistsWeight { body: x, .. } | A::OPlusAll(_, _, x) => is_nonterminating(x),
        A::Singleton(es) => es.iter().all(|(o, w)| *o == Outcome::Div || is_zero_weight(w)),
        _ => false,
    }
}

fn pred_yes(p: &BExpr, q: &BExpr, scope: &Scope) -> bool {
    pred_implies(p, q, scope) == Some(true)
}

fn nonzero(u: &WExpr, sr: Semiring) -> bool {
    u.eval(sr).is_ok_and(|w| !sr.is_zero(&w))
}

/// Recognized weakenings between modal-free assertions.
fn weakens(a: &Assertion, b: &Assertion, scope: &Scope) -> bool {
    use Assertion as A;
    let sr = scope.sr;
    if a == b || *b == A::Top || *a == A::Bot || a.is_nothing() && b.is_nothing() {
        return true;
    }
    match (a, b) {
        (_, A::Or(x, y)) if weakens(a, x, scope) || weakens(a, y, scope) => return true,
        (_, A::And(x, y)) => return weakens(a, x, scope) && weakens(a, y, scope),
        (A::Or(x, y), _) => return weakens(x, b, scope) && weakens(y, b, scope),
        (A::And(x, y), _) if weakens(x, b, scope) || weakens(y, b, scope) => return true,
        (A::ExistsFin(k, lo, hi, x), _) => return (*lo..*hi).all(|i| weakens(&x.instantiate(k, i), b, scope)),
        (_, A::ExistsFin(k, lo, hi, y)) if (*lo..*hi).any(|i| weakens(a, &y.instantiate(k, i), scope)) => return true,
        _ => {}
    }
    if let A::Singleton(_) = a {
        if let Ok(w) = super::sat::singleton(sr, singleton_entries(a)) {
            return satisfies(&w, b, scope).is_yes();
        }
    }
    match (a, b) {
        (_, A::SuppIn(_, _)) if a.is_nothing() => true,
        (A::Atom(p, u), A::Atom(q, v)) => u == v && pred_yes(p, q, scope),
        (A::Atom(p, _), A::SuppIn(q, _)) => pred_yes(p, q, scope),
        (A::Atom(p, u), A::SuppMeets(q, _)) => nonzero(u, sr) && pred_yes(p, q, scope),
        (A::Div(_), A::SuppIn(_, true)) => true,
        (A::Div(u), A::SuppMeets(_, true)) => nonzero(u, sr) && sr.top().is_some(),
        (A::SuppIn(p, d), A::SuppIn(q, e)) | (A::SuppMeets(p, d), A::SuppMeets(q, e)) => {
            (!d || *e) && pred_yes(p, q, scope)
        }
        (A::ScaleL(u, x), A::ScaleL(v, y)) | (A::ScaleR(x, u), A::ScaleR(y, v)) => u == v && weakens(x, y, scope),
        (A::OPlus(xs), A::OPlus(ys))
            if xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| weakens(x, y, scope)) =>
        {
            true
        }
        (A::OPlus(xs), A::SuppIn(..)) => xs.iter().all(|x| weakens(x, b, scope)),
        (A::OPlus(xs), A::SuppMeets(..)) => xs.iter().any(|x| weakens(x, b, scope)),
        _ => false,
    }
}

fn singleton_entries(a: &Assertion) -> &[(Outcome, WExpr)] {
    match a {
        Assertion::Singleton(es) => es,
        _ => &[],
    }
}

/// Weightings over the known states used to refute or exhaust an implication.
fn candidates(scope: &Scope) -> (Vec<Weighting>, bool) {
    let sr = scope.sr;
    let mut states: Vec<State> = scope.domain.as_ref().map(|d| d.states()).unwrap_or_default();
    for s in &scope.pool {
        if !states.contains(s) {
            states.push(s.clone());
        }
    }
    let exhaustive = scope.domain.is_some() && sr == Semiring::Bool && states.len() <= BOOL_ENUM_STATES;
    let mut outcomes: Vec<Outcome> = states.into_iter().map(Outcome::State).collect();
    outcomes.push(Outcome::Div);
    let mut out = vec![Weighting::empty(sr)];
    if exhaustive {
        for mask in 1u32..(1 << outcomes.len()) {
            let es = outcomes
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, o)| (o.clone(), Weight::Bool(true)));
            out.push(Weighting::from_entries(sr, es).expect("Boolean weights"));
        }
    } else {
        for o in &outcomes {
            for w in sr.sample_elements() {
                if !sr.is_zero(&w) {
                    out.push(Weighting::unit(sr, o.clone()).scale_left(&w));
                }
            }
        }
    }
    (out, exhaustive)
}

/// Decides `φ ⇒ ψ` through recognized weakenings, then by checking
/// weightings over the declared domain and pool.
pub fn implies(a: &Assertion, b: &Assertion, scope: &Scope) -> Truth {
    if a.definitional().normalize() == b.definitional().normalize() {
        return Truth::Yes;
    }
    let (a, b) = (a.normalize().expand_modal(), b.normalize().expand_modal());
    if weakens(&a, &b, scope) {
        return Truth::Yes;
    }
    if scope.domain.is_none() && scope.pool.is_empty() {
        return Truth::Unknown(format!("`{a}` => `{b}` is not a recognized weakening"));
    }
    let (ms, exhaustive) = candidates(scope);
    let mut pending = None;
    for m in &ms {
        match satisfies(m, &a, scope) {
            Truth::No => continue,
            Truth::Unknown(r) => {
                pending = Some(r);
                continue;
            }
            Truth::Yes => {}
        }
        match satisfies(m, &b, scope) {
            Truth::No => return Truth::No,
            Truth::Unknown(r) => pending = Some(r),
            Truth::Yes => {}
        }
    }
    match pending {
        Some(r) => Truth::Unknown(r),
        None if exhaustive => Truth::Yes,
        None => Truth::Unknown(format!("no counterexample to `{a}` => `{b}` among sampled weightings")),
    }
}
