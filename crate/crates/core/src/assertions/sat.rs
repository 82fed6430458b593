//! Three-valued satisfaction of assertions by finite weightings.
//!
//! Outcome conjunctions are decided by splitting the weighting. Each part
//! is first reduced to components that either demand an exact mass on a set
//! of outcomes, accept any amount there, or are a fixed weighting. In the
//! Boolean semiring a split exists iff every outcome is covered and every
//! demanding component sees an outcome. Elsewhere the split is an exact
//! rational flow from outcomes to components.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};

use super::flow::{Cap, Net};
use super::{Assertion, WExpr};
use crate::lang::{eval_bool, eval_expr, BExpr, CmpOp, Expr, State};
use crate::semiring::{Rational, Semiring, Weight};
use crate::transformers::FiniteDomain;
use crate::weighting::{Outcome, Weighting};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Truth {
    Yes,
    No,
    Unknown(String),
}

impl Truth {
    pub fn from_bool(b: bool) -> Truth {
        if b {
            Truth::Yes
        } else {
            Truth::No
        }
    }

    pub fn is_yes(&self) -> bool {
        *self == Truth::Yes
    }

    pub fn is_no(&self) -> bool {
        *self == Truth::No
    }

    pub fn negate(self) -> Truth {
        match self {
            Truth::Yes => Truth::No,
            Truth::No => Truth::Yes,
            u => u,
        }
    }

    pub fn and(self, other: impl FnOnce() -> Truth) -> Truth {
        match self {
            Truth::No => Truth::No,
            Truth::Yes => other(),
            Truth::Unknown(r) => match other() {
                Truth::No => Truth::No,
                _ => Truth::Unknown(r),
            },
        }
    }

    pub fn or(self, other: impl FnOnce() -> Truth) -> Truth {
        match self {
            Truth::Yes => Truth::Yes,
            Truth::No => other(),
            Truth::Unknown(r) => match other() {
                Truth::Yes => Truth::Yes,
                _ => Truth::Unknown(r),
            },
        }
    }
}

/// What assertion checks may consult besides the weighting itself.
#[derive(Clone, Debug)]
pub struct Scope {
    pub sr: Semiring,
    /// Declared state space for exhaustive predicate checks.
    pub domain: Option<FiniteDomain>,
    /// Known states, used to look for witnesses and counterexamples.
    pub pool: Vec<State>,
    /// Bound on enumerated splits and alternatives.
    pub split_budget: usize,
    /// Largest witness tried for `exists k : nat`.
    pub nat_bound: i64,
}

impl Scope {
    pub fn new(sr: Semiring) -> Scope {
        Scope { sr, domain: None, pool: Vec::new(), split_budget: 100_000, nat_bound: 64 }
    }

    pub fn with_domain(mut self, d: FiniteDomain) -> Scope {
        self.domain = Some(d);
        self
    }
}

pub(crate) fn holds(p: &BExpr, s: &State) -> Result<bool, String> {
    eval_bool(p, s).map_err(|e| format!("predicate `{p}` at {s}: {e}"))
}

fn from_result(r: Result<bool, String>) -> Truth {
    match r {
        Ok(b) => Truth::from_bool(b),
        Err(e) => Truth::Unknown(e),
    }
}

fn supp_in(m: &Weighting, p: &BExpr, div: bool) -> Result<bool, String> {
    for o in m.support() {
        let ok = match o {
            Outcome::Div => div,
            Outcome::State(s) => holds(p, s)?,
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

fn supp_meets(m: &Weighting, p: &BExpr, div: bool) -> Result<bool, String> {
    let mut pending = None;
    for o in m.support() {
        match o {
            Outcome::Div if div => return Ok(true),
            Outcome::Div => {}
            Outcome::State(s) => match holds(p, s) {
                Ok(true) => return Ok(true),
                Ok(false) => {}
                Err(e) => pending = Some(e),
            },
        }
    }
    pending.map_or(Ok(false), Err)
}

fn div_mass(sr: Semiring, u: &Weight) -> Result<Weight, String> {
    let top = sr.top().ok_or_else(|| format!("{} has no top element for divergence", sr.name()))?;
    Ok(sr.mul(u, &top))
}

pub(crate) fn singleton(sr: Semiring, es: &[(Outcome, WExpr)]) -> Result<Weighting, String> {
    let mut entries = Vec::new();
    for (o, w) in es {
        entries.push((o.clone(), w.eval(sr).map_err(|e| e.to_string())?));
    }
    Weighting::from_entries(sr, entries).map_err(|e| e.to_string())
}

/// For `∃k. P` with `P` an atom containing a conjunct `k = e` (`e` free of
/// `k`), every supported state fixes the only possible witness. Returns
/// `Some(None)` when no natural number can work.
fn pinned_witness(m: &Weighting, k: &str, x: &Assertion) -> Option<Option<i64>> {
    let Assertion::Atom(p, _) = x else { return None };
    let e = p.conjuncts().into_iter().find_map(|c| match c {
        BExpr::Cmp(CmpOp::Eq, Expr::Var(v), e) | BExpr::Cmp(CmpOp::Eq, e, Expr::Var(v)) if v == k => {
            let mut fv = BTreeSet::new();
            e.free_vars(&mut fv);
            (!fv.contains(k)).then_some(e)
        }
        _ => None,
    })?;
    let mut values = m.states().map(|(s, _)| eval_expr(e, s));
    let first = values.next()?.ok()?;
    for v in values {
        if v.ok()? != first {
            return Some(None);
        }
    }
    let nat = first.is_integer() && !first.is_negative();
    Some(nat.then(|| first.to_integer().try_into().ok()).flatten())
}

/// Decides `m ⊨ φ`. `Unknown` is returned instead of guessing.
pub fn satisfies(m: &Weighting, phi: &Assertion, scope: &Scope) -> Truth {
    use Assertion as A;
    let sr = scope.sr;
    match phi {
        A::Top => Truth::Yes,
        A::Bot => Truth::No,
        A::Atom(p, u) => {
            let u = match u.eval(sr) {
                Ok(u) => u,
                Err(e) => return Truth::Unknown(e.to_string()),
            };
            match m.mass() {
                Ok(mass) if mass == u => from_result(supp_in(m, p, false)),
                Ok(_) => Truth::No,
                Err(_) => Truth::No,
            }
        }
        A::Div(u) => match u.eval(sr).map_err(|e| e.to_string()).and_then(|u| div_mass(sr, &u)) {
            Ok(w) => Truth::from_bool(*m == Weighting::div(sr, w)),
            Err(e) => Truth::Unknown(e),
        },
        A::Not(x) => satisfies(m, x, scope).negate(),
        A::And(x, y) => satisfies(m, x, scope).and(|| satisfies(m, y, scope)),
        A::Or(x, y) => satisfies(m, x, scope).or(|| satisfies(m, y, scope)),
        A::Implies(x, y) => satisfies(m, x, scope).negate().or(|| satisfies(m, y, scope)),
        A::OPlus(xs) => split_truth(m, &xs.iter().collect::<Vec<_>>(), scope),
        A::ExistsWeight { .. } => split_truth(m, &[phi], scope),
        A::Box(_) | A::Dia(_) | A::BoxT(_) | A::DiaP(_) | A::AlwaysDiv | A::SometimesDiv => {
            satisfies(m, &phi.definitional(), scope)
        }
        A::SuppIn(p, d) => from_result(supp_in(m, p, *d)),
        A::SuppMeets(p, d) => from_result(supp_meets(m, p, *d)),
        A::Singleton(es) => match singleton(sr, es) {
            Ok(w) => Truth::from_bool(*m == w),
            Err(e) => Truth::Unknown(e),
        },
        A::ExistsFin(k, lo, hi, x) => {
            let mut acc = Truth::No;
            for i in *lo..*hi {
                acc = acc.or(|| satisfies(m, &x.instantiate(k, i), scope));
                if acc.is_yes() {
                    break;
                }
            }
            acc
        }
        A::ExistsNat(k, x) => {
            // An atom excludes divergence, and a weight free of `k` fixes the mass for every witness.
            if let A::Atom(_, u) = x.as_ref() {
                if m.has_div() {
                    return Truth::No;
                }
                if let (Ok(u), Ok(mass)) = (u.eval(sr), m.mass()) {
                    if mass != u {
                        return Truth::No;
                    }
                }
            }
            if let Some(w) = pinned_witness(m, k, x) {
                return match w {
                    Some(i) => satisfies(m, &x.instantiate(k, i), scope),
                    None => Truth::No,
                };
            }
            for i in 0..=scope.nat_bound {
                if satisfies(m, &x.instantiate(k, i), scope).is_yes() {
                    return Truth::Yes;
                }
            }
            Truth::Unknown(format!("no witness for `{k}` up to {}", scope.nat_bound))
        }
        A::ScaleL(u, x) | A::ScaleR(x, u) => match comps_of(x, scope, &mut Env::default()) {
            Ok(_) => split_truth(m, &[phi], scope),
            Err(_) => unscale(m, u, x, scope),
        },
        A::OPlusAll(..) => Truth::Unknown("infinite outcome conjunction".into()),
    }
}

fn unscale(m: &Weighting, u: &WExpr, x: &Assertion, scope: &Scope) -> Truth {
    let sr = scope.sr;
    let u = match u.eval(sr) {
        Ok(u) => u,
        Err(e) => return Truth::Unknown(e.to_string()),
    };
    if u == sr.one() {
        return satisfies(m, x, scope);
    }
    if sr.is_zero(&u) {
        return if m.is_empty() {
            Truth::Unknown("scaling by zero hides whether the inner assertion is satisfiable".into())
        } else {
            Truth::No
        };
    }
    match (sr, &u) {
        (Semiring::Prob, Weight::Rat(q)) => {
            let mut entries = Vec::new();
            for (o, w) in m.iter() {
                let v = w.to_rational().expect("finite") / q;
                if v > Rational::one() {
                    return Truth::No;
                }
                entries.push((o.clone(), Weight::Rat(v)));
            }
            match Weighting::from_entries(sr, entries) {
                Ok(inner) => satisfies(&inner, x, scope),
                Err(_) => Truth::No,
            }
        }
        _ => Truth::Unknown(format!("cannot divide by {u} in {}", sr.name())),
    }
}

fn split_truth(m: &Weighting, parts: &[&Assertion], scope: &Scope) -> Truth {
    match split_witness(m, parts, scope) {
        Ok(Some(_)) => Truth::Yes,
        Ok(None) => Truth::No,
        Err(e) => Truth::Unknown(e),
    }
}

#[derive(Clone, Debug)]
enum Allow {
    Pred(BExpr),
    Div,
    PredOrDiv(BExpr),
    Any,
}

impl Allow {
    fn admits(&self, o: &Outcome) -> Result<bool, String> {
        Ok(match (self, o) {
            (Allow::Any, _) | (Allow::Div | Allow::PredOrDiv(_), Outcome::Div) => true,
            (Allow::Pred(_), Outcome::Div) | (Allow::Div, Outcome::State(_)) => false,
            (Allow::Pred(p) | Allow::PredOrDiv(p), Outcome::State(s)) => holds(p, s)?,
        })
    }

    fn of_support(p: &BExpr, div: bool) -> Allow {
        match (p, div) {
            (BExpr::True, true) => Allow::Any,
            (BExpr::False, true) => Allow::Div,
            (p, true) => Allow::PredOrDiv(p.clone()),
            (p, false) => Allow::Pred(p.clone()),
        }
    }
}

#[derive(Clone, Debug)]
enum Comp {
    /// Exactly this mass on admitted outcomes.
    Exact(Allow, Weight),
    /// Any amount on admitted outcomes; members of a group must not all be empty.
    Free(Allow, Option<usize>),
    Fixed(Weighting),
}

#[derive(Default)]
struct Env {
    weight_vars: BTreeMap<String, Option<usize>>,
    groups: usize,
}

impl Env {
    fn group_of(&self, v: &str) -> Result<Option<usize>, String> {
        self.weight_vars.get(v).copied().ok_or_else(|| format!("unbound weight `{v}`"))
    }
}

type Alternatives = Vec<Vec<Comp>>;

fn cross(a: Alternatives, b: Alternatives, budget: usize) -> Result<Alternatives, String> {
    if a.len().saturating_mul(b.len()) > budget {
        return Err("too many alternatives in outcome conjunction".into());
    }
    let mut out = Vec::new();
    for x in &a {
        for y in &b {
            let mut z = x.clone();
            z.extend(y.iter().cloned());
            out.push(z);
        }
    }
    Ok(out)
}

fn scale_alts(alts: Alternatives, u: &WExpr, scope: &Scope) -> Result<Alternatives, String> {
    let sr = scope.sr;
    let u = u.eval(sr).map_err(|e| e.to_string())?;
    if sr.is_zero(&u) {
        return Ok(if alts.is_empty() { vec![] } else { vec![vec![]] });
    }
    let one = u == sr.one();
    alts.into_iter()
        .map(|cs| {
            cs.into_iter()
                .map(|c| match c {
                    Comp::Exact(a, w) => Ok(Comp::Exact(a, sr.mul(&u, &w))),
                    Comp::Fixed(w) => Ok(Comp::Fixed(w.scale_left(&u))),
                    free if one => Ok(free),
                    _ => Err("scaled unconstrained part".to_string()),
                })
                .collect()
        })
        .collect()
}

fn comps_of(phi: &Assertion, scope: &Scope, env: &mut Env) -> Result<Alternatives, String> {
    use Assertion as A;
    let sr = scope.sr;
    let eval = |u: &WExpr| u.eval(sr).map_err(|e| e.to_string());
    Ok(match phi {
        A::Top => vec![vec![Comp::Free(Allow::Any, None)]],
        A::Bot => vec![],
        A::Atom(p, WExpr::Var(v)) => vec![vec![Comp::Free(Allow::Pred(p.clone()), env.group_of(v)?)]],
        A::Div(WExpr::Var(v)) => vec![vec![Comp::Free(Allow::Div, env.group_of(v)?)]],
        A::Atom(p, u) => {
            let u = eval(u)?;
            if sr.is_zero(&u) {
                vec![vec![]]
            } else {
                vec![vec![Comp::Exact(Allow::Pred(p.clone()), u)]]
            }
        }
        A::Div(u) => {
            let w = div_mass(sr, &eval(u)?)?;
            if sr.is_zero(&w) {
                vec![vec![]]
            } else {
                vec![vec![Comp::Exact(Allow::Div, w)]]
            }
        }
        A::OPlus(xs) => {
            let mut acc: Alternatives = vec![vec![]];
            for x in xs {
                acc = cross(acc, comps_of(x, scope, env)?, scope.split_budget)?;
            }
            acc
        }
        A::Or(x, y) => {
            let mut a = comps_of(x, scope, env)?;
            a.extend(comps_of(y, scope, env)?);
            a
        }
        A::ExistsFin(k, lo, hi, x) => {
            let mut a = Vec::new();
            for i in *lo..*hi {
                a.extend(comps_of(&x.instantiate(k, i), scope, env)?);
                if a.len() > scope.split_budget {
                    return Err("too many alternatives".into());
                }
            }
            a
        }
        A::ExistsWeight { vars, nonzero, body } => {
            let group = nonzero.then(|| {
                env.groups += 1;
                env.groups - 1
            });
            let saved: Vec<_> = vars.iter().map(|v| (v.clone(), env.weight_vars.insert(v.clone(), group))).collect();
            let r = comps_of(body, scope, env);
            for (v, old) in saved {
                match old {
                    Some(g) => env.weight_vars.insert(v, g),
                    None => env.weight_vars.remove(&v),
                };
            }
            r?
        }
        A::ScaleL(u, x) | A::ScaleR(x, u) => scale_alts(comps_of(x, scope, env)?, u, scope)?,
        A::Box(_) | A::Dia(_) | A::BoxT(_) | A::DiaP(_) | A::AlwaysDiv | A::SometimesDiv => {
            comps_of(&phi.definitional(), scope, env)?
        }
        A::SuppIn(p, d) => vec![vec![Comp::Free(Allow::of_support(p, *d), None)]],
        A::SuppMeets(p, d) => {
            env.groups += 1;
            let g = env.groups - 1;
            vec![vec![Comp::Free(Allow::of_support(p, *d), Some(g)), Comp::Free(Allow::Any, None)]]
        }
        A::Singleton(es) => vec![vec![Comp::Fixed(singleton(sr, es)?)]],
        other => return Err(format!("no split procedure for `{other}`")),
    })
}

/// Finds `m = m_1 + ... + m_k` with `m_i ⊨ parts[i]`. `Ok(None)` means no
/// split exists; `Err` means the search could not decide.
pub fn split_witness(m: &Weighting, parts: &[&Assertion], scope: &Scope) -> Result<Option<Vec<Weighting>>, String> {
    let mut env = Env::default();
    let mut per_part = Vec::new();
    for p in parts {
        match comps_of(p, scope, &mut env) {
            Ok(a) => per_part.push(a),
            Err(e) => return generic_split(m, parts, scope).map_err(|g| format!("{e}; {g}")),
        }
    }
    let mut combos: Vec<(Vec<Comp>, Vec<usize>)> = vec![(vec![], vec![])];
    for (i, alts) in per_part.iter().enumerate() {
        if combos.len().saturating_mul(alts.len()) > scope.split_budget {
            return Err("too many alternatives in outcome conjunction".into());
        }
        let mut next = Vec::new();
        for (cs, owners) in &combos {
            for alt in alts {
                let mut cs = cs.clone();
                let mut owners = owners.clone();
                cs.extend(alt.iter().cloned());
                owners.extend(std::iter::repeat_n(i, alt.len()));
                next.push((cs, owners));
            }
        }
        combos = next;
    }
    let mut undecided = None;
    for (cs, owners) in combos {
        match solve(m, &cs, env.groups, scope) {
            Ok(Some(ws)) => {
                let mut out = vec![Weighting::empty(scope.sr); parts.len()];
                for (w, i) in ws.iter().zip(owners) {
                    out[i] = out[i].wsum(w).map_err(|e| e.to_string())?;
                }
                return Ok(Some(out));
            }
            Ok(None) => {}
            Err(e) => undecided = Some(e),
        }
    }
    match undecided {
        Some(e) => Err(e),
        None => Ok(None),
    }
}

fn allowed(c: &Comp, o: &Outcome) -> Result<bool, String> {
    match c {
        Comp::Exact(a, _) | Comp::Free(a, _) => a.admits(o),
        Comp::Fixed(_) => Ok(false),
    }
}

fn solve(m: &Weighting, cs: &[Comp], groups: usize, scope: &Scope) -> Result<Option<Vec<Weighting>>, String> {
    match scope.sr {
        Semiring::Bool => solve_bool(m, cs, groups),
        sr => solve_flow(m, cs, groups, sr),
    }
}

fn solve_bool(m: &Weighting, cs: &[Comp], groups: usize) -> Result<Option<Vec<Weighting>>, String> {
    let sr = Semiring::Bool;
    let outcomes: Vec<&Outcome> = m.support().collect();
    let mut covered = vec![false; outcomes.len()];
    let mut group_hit = vec![false; groups];
    let mut out = Vec::with_capacity(cs.len());
    for c in cs {
        if let Comp::Fixed(w) = c {
            for o in w.support() {
                match outcomes.iter().position(|x| *x == o) {
                    Some(i) => covered[i] = true,
                    None => return Ok(None),
                }
            }
            out.push(w.clone());
            continue;
        }
        if let Comp::Exact(_, w) = c {
            if sr.is_zero(w) {
                out.push(Weighting::empty(sr));
                continue;
            }
        }
        let mut part = Weighting::empty(sr);
        for (i, o) in outcomes.iter().enumerate() {
            if allowed(c, o)? {
                covered[i] = true;
                part.set((*o).clone(), sr.one());
            }
        }
        match c {
            Comp::Exact(..) if part.is_empty() => return Ok(None),
            Comp::Free(_, Some(g)) if !part.is_empty() => group_hit[*g] = true,
            _ => {}
        }
        out.push(part);
    }
    let ok = covered.iter().all(|c| *c) && group_hit.iter().all(|g| *g);
    Ok(ok.then_some(out))
}

fn to_rat(w: &Weight) -> Result<Rational, String> {
    w.to_rational().ok_or_else(|| "infinite weights are not split".to_string())
}

fn solve_flow(m: &Weighting, cs: &[Comp], groups: usize, sr: Semiring) -> Result<Option<Vec<Weighting>>, String> {
    let mut rest: BTreeMap<Outcome, Rational> = BTreeMap::new();
    for (o, w) in m.iter() {
        rest.insert(o.clone(), to_rat(w)?);
    }
    for c in cs {
        if let Comp::Fixed(w) = c {
            for (o, x) in w.iter() {
                let left = rest.get(o).cloned().unwrap_or_default() - to_rat(x)?;
                if left.is_negative() {
                    return Ok(None);
                }
                rest.insert(o.clone(), left);
            }
        }
    }
    rest.retain(|_, q| !q.is_zero());
    let outcomes: Vec<(Outcome, Rational)> = rest.into_iter().collect();
    let k = outcomes.len();
    let (s, t) = (0, k + cs.len() + 1);
    let comp = |j: usize| k + 1 + j;
    let mut net = Net::new(t + 1);
    let mut exact_total = Rational::zero();
    let mut free = vec![false; t + 1];
    for (i, (o, q)) in outcomes.iter().enumerate() {
        net.add_edge(s, i + 1, Cap::Fin(q.clone()));
        for (j, c) in cs.iter().enumerate() {
            if allowed(c, o)? {
                net.add_edge(i + 1, comp(j), Cap::Inf);
            }
        }
    }
    for (j, c) in cs.iter().enumerate() {
        match c {
            Comp::Exact(_, w) => {
                let q = to_rat(w)?;
                exact_total += &q;
                net.add_edge(comp(j), t, Cap::Fin(q));
            }
            Comp::Free(..) => {
                free[comp(j)] = true;
                net.add_edge(comp(j), t, Cap::Inf);
            }
            Comp::Fixed(_) => net.add_edge(comp(j), t, Cap::Fin(Rational::zero())),
        }
    }
    let exact_only = |u: usize, v: usize| !(v == t && free[u]);
    if net.max_flow(s, t, &exact_only) != exact_total {
        return Ok(None);
    }
    net.max_flow(s, t, &|_, _| true);
    let total: Rational = outcomes.iter().map(|(_, q)| q.clone()).sum();
    let pushed: Rational = (1..=k).map(|i| net.flow(s, i).clone()).sum();
    if pushed != total {
        return Ok(None);
    }
    for g in 0..groups {
        let members: Vec<usize> = cs
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(c, Comp::Free(_, Some(x)) if *x == g))
            .map(|(j, _)| comp(j))
            .collect();
        if members.iter().any(|c| net.flow(*c, t).is_positive()) {
            continue;
        }
        let ok = |u: usize, v: usize| u != s && v != s && v != t && (u != t || free[v]);
        let mut moved = false;
        for c in &members {
            if let Some(p) = net.path(t, *c, &ok) {
                let b = net.bottleneck(&p).expect("cycle through a positive edge");
                let amount = if sr == Semiring::Prob { b / Rational::from_integer(2.into()) } else { Rational::one() };
                let mut cycle = p;
                cycle.push(t);
                net.push(&cycle, &amount);
                moved = true;
                break;
            }
        }
        if !moved {
            return Ok(None);
        }
    }
    let mut out = Vec::with_capacity(cs.len());
    for (j, c) in cs.iter().enumerate() {
        if let Comp::Fixed(w) = c {
            out.push(w.clone());
            continue;
        }
        let mut entries = Vec::new();
        for (i, (o, _)) in outcomes.iter().enumerate() {
            let f = net.flow(i + 1, comp(j));
            if f.is_positive() {
                entries.push((o.clone(), sr.from_rational(f).map_err(|e| e.to_string())?));
            }
        }
        out.push(Weighting::from_entries(sr, entries).map_err(|e| e.to_string())?);
    }
    Ok(Some(out))
}

/// Brute-force splits for parts without a component form (Boolean only).
fn generic_split(m: &Weighting, parts: &[&Assertion], scope: &Scope) -> Result<Option<Vec<Weighting>>, String> {
    if scope.sr != Semiring::Bool {
        return Err(format!("no exact split procedure in {}", scope.sr.name()));
    }
    let outcomes: Vec<&Outcome> = m.support().collect();
    let choices = (1usize << parts.len()) - 1;
    let total = (choices as f64).powi(outcomes.len() as i32);
    if parts.len() > 16 || total > scope.split_budget as f64 {
        return Err("split search exceeded its budget".into());
    }
    let mut undecided = None;
    let mut idx = vec![1usize; outcomes.len()];
    loop {
        let mut split = vec![Weighting::empty(Semiring::Bool); parts.len()];
        for (o, mask) in outcomes.iter().zip(&idx) {
            for (i, part) in split.iter_mut().enumerate() {
                if mask & (1 << i) != 0 {
                    part.set((*o).clone(), Weight::Bool(true));
                }
            }
        }
        let mut verdict = Truth::Yes;
        for (w, p) in split.iter().zip(parts) {
            verdict = verdict.and(|| satisfies(w, p, scope));
            if verdict.is_no() {
                break;
            }
        }
        match verdict {
            Truth::Yes => return Ok(Some(split)),
            Truth::Unknown(e) => undecided = Some(e),
            Truth::No => {}
        }
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return match undecided {
                    Some(e) => Err(e),
                    None => Ok(None),
                };
            }
            idx[pos] += 1;
            if idx[pos] <= choices {
                break;
            }
            idx[pos] = 1;
            pos += 1;
        }
    }
}
