//! Representative weightings satisfying an assertion, used as preconditions
//! when a triple cannot be checked over every weighting.

use std::collections::BTreeSet;

use num_traits::{One, Zero};

use super::sat::holds;
use super::{satisfies, Assertion, Scope, WExpr};
use crate::lang::{eval_expr, BExpr, CmpOp, Expr, State};
use crate::semiring::{rat_int, Rational, Semiring, Weight};
use crate::weighting::{Outcome, Weighting};

/// Evaluations spent looking for witness states of one predicate.
const WITNESS_ATTEMPTS: usize = 20_000;

fn collect_constants(e: &Expr, out: &mut BTreeSet<Rational>) {
    match e {
        Expr::Num(q) => {
            out.insert(q.clone());
        }
        Expr::Var(_) => {}
        Expr::Index(_, a) | Expr::Neg(a) => collect_constants(a, out),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Pow(a, b) => {
            collect_constants(a, out);
            collect_constants(b, out);
        }
    }
}

fn bexpr_constants(b: &BExpr, out: &mut BTreeSet<Rational>) {
    match b {
        BExpr::Cmp(_, x, y) => {
            collect_constants(x, out);
            collect_constants(y, out);
        }
        BExpr::Not(x) => bexpr_constants(x, out),
        BExpr::And(x, y) | BExpr::Or(x, y) => {
            bexpr_constants(x, out);
            bexpr_constants(y, out);
        }
        _ => {}
    }
}

/// Solves `a = b` for `var` when the other variables are bound in `s` and
/// the difference is affine in `var`.
fn solve_for(var: &str, a: &Expr, b: &Expr, s: &State) -> Option<Rational> {
    let f = |v: i64| -> Option<Rational> {
        let t = s.with(var, rat_int(v));
        Some(eval_expr(a, &t).ok()? - eval_expr(b, &t).ok()?)
    };
    let (f0, f1, f2) = (f(0)?, f(1)?, f(2)?);
    let slope = &f1 - &f0;
    if slope.is_zero() || &f2 - &f1 != slope {
        return None;
    }
    Some(-f0 / slope)
}

/// States over `vars` satisfying `p`: from the scope's domain when one is
/// declared, otherwise by solving equalities and trying small values.
pub fn witness_states(p: &BExpr, scope: &Scope, vars: &[String], cap: usize) -> Vec<State> {
    if let Some(d) = &scope.domain {
        let all: Vec<State> = d.states().into_iter().filter(|s| holds(p, s) == Ok(true)).collect();
        if all.len() <= cap {
            return all;
        }
        let step = all.len() as f64 / cap as f64;
        return (0..cap).map(|i| all[(i as f64 * step) as usize].clone()).collect();
    }
    let mut values: BTreeSet<Rational> = (-1..=3).map(rat_int).collect();
    bexpr_constants(p, &mut values);
    let values: Vec<Rational> = values.into_iter().collect();
    let eqs: Vec<(&Expr, &Expr)> = p
        .conjuncts()
        .into_iter()
        .filter_map(|c| match c {
            BExpr::Cmp(CmpOp::Eq, a, b) => Some((a, b)),
            _ => None,
        })
        .collect();
    let mut out = Vec::new();
    let mut attempts = 0;
    search(p, vars, &eqs, &values, State::new(), 0, cap, &mut attempts, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn search(
    p: &BExpr,
    vars: &[String],
    eqs: &[(&Expr, &Expr)],
    values: &[Rational],
    s: State,
    i: usize,
    cap: usize,
    attempts: &mut usize,
    out: &mut Vec<State>,
) {
    if out.len() >= cap || *attempts >= WITNESS_ATTEMPTS {
        return;
    }
    let Some(v) = vars.get(i) else {
        *attempts += 1;
        if holds(p, &s) == Ok(true) {
            out.push(s);
        }
        return;
    };
    let solved = eqs.iter().find_map(|(a, b)| {
        let mut fv = BTreeSet::new();
        a.free_vars(&mut fv);
        b.free_vars(&mut fv);
        let rest_bound = fv.iter().all(|x| x == v || s.get(x).is_some());
        (fv.contains(v) && rest_bound).then(|| solve_for(v, a, b, &s)).flatten()
    });
    let candidates: Vec<Rational> = match solved {
        Some(q) => vec![q],
        None => values.to_vec(),
    };
    for q in candidates {
        search(p, vars, eqs, values, s.with(v, q), i + 1, cap, attempts, out);
    }
}

fn closed_weight(u: &WExpr, sr: Semiring) -> Option<Weight> {
    u.eval(sr).ok()
}

fn half(w: &Weight, sr: Semiring) -> Option<(Weight, Weight)> {
    match sr {
        Semiring::Prob => {
            let q = w.to_rational()? / rat_int(2);
            let h = sr.from_rational(&q).ok()?;
            Some((h.clone(), h))
        }
        Semiring::Nat | Semiring::NatInf => {
            let q = w.to_rational()?;
            if q <= Rational::one() {
                return None;
            }
            Some((sr.one(), sr.from_rational(&(q - Rational::one())).ok()?))
        }
        Semiring::Bool => Some((w.clone(), w.clone())),
    }
}

struct Sampler<'a> {
    scope: &'a Scope,
    vars: &'a [String],
    cap: usize,
}

impl Sampler<'_> {
    fn sr(&self) -> Semiring {
        self.scope.sr
    }

    fn point(&self, entries: Vec<(Outcome, Weight)>) -> Option<Weighting> {
        Weighting::from_entries(self.sr(), entries).ok()
    }

    fn atom(&self, p: &BExpr, w: &Weight) -> Vec<Weighting> {
        let sr = self.sr();
        if sr.is_zero(w) {
            return vec![Weighting::empty(sr)];
        }
        let states = witness_states(p, self.scope, self.vars, self.cap.max(2));
        let mut out: Vec<Weighting> =
            states.iter().filter_map(|s| self.point(vec![(Outcome::State(s.clone()), w.clone())])).collect();
        if let Some((a, b)) = half(w, sr) {
            for pair in states.windows(2).take(self.cap) {
                let es =
                    vec![(Outcome::State(pair[0].clone()), a.clone()), (Outcome::State(pair[1].clone()), b.clone())];
                out.extend(self.point(es));
            }
            if sr == Semiring::Bool && states.len() > 2 {
                out.extend(self.point(states.iter().map(|s| (Outcome::State(s.clone()), w.clone())).collect()));
            }
        }
        out
    }

    fn div(&self, w: &Weight) -> Vec<Weighting> {
        let sr = self.sr();
        match sr.top() {
            Some(t) => vec![Weighting::div(sr, sr.mul(w, &t))],
            None => vec![],
        }
    }

    fn weights(&self, nonzero: bool) -> Vec<Weight> {
        let sr = self.sr();
        sr.sample_elements().into_iter().filter(|w| !nonzero || !sr.is_zero(w)).collect()
    }

    fn product(&self, lists: Vec<Vec<Weighting>>) -> Vec<Weighting> {
        let mut acc = vec![Weighting::empty(self.sr())];
        for list in lists {
            let mut next = Vec::new();
            for a in &acc {
                for b in &list {
                    if let Ok(m) = a.wsum(b) {
                        next.push(m);
                    }
                    if next.len() >= self.cap * 4 {
                        break;
                    }
                }
            }
            acc = next;
        }
        acc
    }

    fn generic(&self) -> Vec<Weighting> {
        let sr = self.sr();
        let mut out = vec![Weighting::empty(sr)];
        for w in self.weights(true) {
            out.extend(self.atom(&BExpr::True, &w));
            out.extend(self.div(&w));
        }
        out
    }

    fn models(&self, phi: &Assertion) -> Vec<Weighting> {
        use Assertion as A;
        let sr = self.sr();
        match phi {
            A::Bot => vec![],
            A::Top => self.generic(),
            A::Atom(p, u) => closed_weight(u, sr).map_or_else(Vec::new, |w| self.atom(p, &w)),
            A::Div(u) => closed_weight(u, sr).map_or_else(Vec::new, |w| self.div(&w)),
            A::OPlus(xs) => self.product(xs.iter().map(|x| self.models(x)).collect()),
            A::Or(x, y) => {
                let mut out = self.models(x);
                out.extend(self.models(y));
                out
            }
            A::And(x, y) => {
                let mut out = self.models(x);
                out.extend(self.models(y));
                out
            }
            A::ScaleL(u, x) | A::ScaleR(x, u) => match closed_weight(u, sr) {
                Some(w) => self.models(x).iter().map(|m| m.scale_left(&w)).collect(),
                None => vec![],
            },
            A::ExistsFin(k, lo, hi, body) => (*lo..*hi).flat_map(|n| self.models(&body.instantiate(k, n))).collect(),
            A::ExistsNat(k, body) => (0..=4).flat_map(|n| self.models(&body.instantiate(k, n))).collect(),
            A::ExistsWeight { vars, body, .. } => {
                let mut bodies = vec![(**body).clone()];
                for v in vars {
                    bodies = bodies
                        .iter()
                        .flat_map(|b| {
                            self.weights(false)
                                .into_iter()
                                .filter_map(|w| w.to_rational().map(|q| b.subst_weight(v, &WExpr::Num(Expr::Num(q)))))
                                .collect::<Vec<_>>()
                        })
                        .collect();
                }
                bodies.iter().flat_map(|b| self.models(b)).collect()
            }
            A::Singleton(es) => {
                let entries: Option<Vec<(Outcome, Weight)>> =
                    es.iter().map(|(o, u)| closed_weight(u, sr).map(|w| (o.clone(), w))).collect();
                entries.and_then(|es| self.point(es)).into_iter().collect()
            }
            A::SuppIn(p, d) => {
                let mut out = vec![Weighting::empty(sr)];
                for w in self.weights(true) {
                    let ms = self.atom(p, &w);
                    if *d {
                        out.extend(self.product(vec![ms, self.div(&w)]));
                    }
                    out.extend(self.atom(p, &w));
                }
                out
            }
            A::SuppMeets(p, d) => {
                let mut out = Vec::new();
                for w in self.weights(true) {
                    out.extend(self.atom(p, &w));
                    if *d {
                        out.extend(self.div(&w));
                    }
                }
                out
            }
            A::Box(_) | A::Dia(_) | A::BoxT(_) | A::DiaP(_) | A::AlwaysDiv | A::SometimesDiv => {
                self.models(&phi.expand_modal())
            }
            A::Not(_) | A::Implies(..) | A::OPlusAll(..) => self.generic(),
        }
    }
}

/// Up to roughly `cap` distinct weightings over `vars` that satisfy `phi`.
pub fn sample_models(phi: &Assertion, scope: &Scope, vars: &[String], cap: usize) -> Vec<Weighting> {
    let sampler = Sampler { scope, vars, cap };
    let mut out: Vec<Weighting> = Vec::new();
    for m in sampler.models(phi) {
        if out.len() >= cap * 4 {
            break;
        }
        if !out.contains(&m) && satisfies(&m, phi, scope).is_yes() {
            out.push(m);
        }
    }
    out
}
