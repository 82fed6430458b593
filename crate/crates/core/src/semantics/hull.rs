//! Box summaries of large residuals.
//!
//! A hull over-approximates a set of states by per-variable intervals and
//! keeps their total mass exactly. It only advances a loop while every test
//! it meets is decided on the whole box, so the mass stays exact.

use std::collections::BTreeMap;

use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::lang::{Action, BExpr, CmpOp, Command, Expr, Guard, LValue};
use crate::semiring::{Rational, Semiring, Weight};
use crate::weighting::Weighting;

type Iv = (Rational, Rational);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hull {
    pub mass: Weight,
    pub bounds: BTreeMap<String, Iv>,
}

/// `None` means the box could not decide something.
type Step<T> = Option<T>;

impl Hull {
    /// The box spanned by the states of `m`; divergence is ignored.
    pub fn of(m: &Weighting) -> Option<Hull> {
        let mut bounds: BTreeMap<String, Iv> = BTreeMap::new();
        let mut first = true;
        for (s, _) in m.states() {
            if first {
                bounds = s.iter().map(|(k, v)| (k.clone(), (v.clone(), v.clone()))).collect();
                first = false;
                continue;
            }
            if s.vars().count() != bounds.len() {
                return None;
            }
            for (k, v) in s.iter() {
                let b = bounds.get_mut(k)?;
                if *v < b.0 {
                    b.0 = v.clone();
                }
                if *v > b.1 {
                    b.1 = v.clone();
                }
            }
        }
        if first {
            return None;
        }
        Some(Hull { mass: m.state_mass().ok()?, bounds })
    }

    fn join(self, other: Hull, sr: Semiring) -> Step<Hull> {
        let mass = sr.add(&self.mass, &other.mass).ok()?;
        let mut bounds = self.bounds;
        for (k, (lo, hi)) in other.bounds {
            let b = bounds.get_mut(&k)?;
            if lo < b.0 {
                b.0 = lo;
            }
            if hi > b.1 {
                b.1 = hi;
            }
        }
        Some(Hull { mass, bounds })
    }

    pub fn lower(&self, var: &str) -> Option<&Rational> {
        self.bounds.get(var).map(|b| &b.0)
    }
}

fn point(q: Rational) -> Iv {
    (q.clone(), q)
}

fn int_point(iv: &Iv) -> Option<i64> {
    (iv.0 == iv.1 && iv.0.is_integer()).then(|| iv.0.to_integer().to_i64()).flatten()
}

fn pow_iv(base: &Iv, k: i64) -> Option<Iv> {
    let mag = usize::try_from(k.unsigned_abs()).ok().filter(|m| *m <= 4096)?;
    if base.0 == base.1 {
        let p = num_traits::pow(base.0.clone(), mag);
        if k < 0 {
            if p.is_zero() {
                return None;
            }
            return Some(point(Rational::one() / p));
        }
        return Some(point(p));
    }
    if !base.0.is_positive() {
        return None;
    }
    let (lo, hi) = (num_traits::pow(base.0.clone(), mag), num_traits::pow(base.1.clone(), mag));
    Some(if k < 0 { (Rational::one() / hi, Rational::one() / lo) } else { (lo, hi) })
}

fn eval_iv(e: &Expr, b: &BTreeMap<String, Iv>) -> Step<Iv> {
    Some(match e {
        Expr::Num(q) => point(q.clone()),
        Expr::Var(v) => b.get(v)?.clone(),
        Expr::Index(a, i) => {
            let i = int_point(&eval_iv(i, b)?)?;
            b.get(&format!("{a}{i}"))?.clone()
        }
        Expr::Neg(x) => {
            let (lo, hi) = eval_iv(x, b)?;
            (-hi, -lo)
        }
        Expr::Add(x, y) => {
            let (a, c) = (eval_iv(x, b)?, eval_iv(y, b)?);
            (a.0 + c.0, a.1 + c.1)
        }
        Expr::Sub(x, y) => {
            let (a, c) = (eval_iv(x, b)?, eval_iv(y, b)?);
            (a.0 - c.1, a.1 - c.0)
        }
        Expr::Mul(x, y) => {
            let (a, c) = (eval_iv(x, b)?, eval_iv(y, b)?);
            let ps = [&a.0 * &c.0, &a.0 * &c.1, &a.1 * &c.0, &a.1 * &c.1];
            let lo = ps.iter().min()?.clone();
            let hi = ps.iter().max()?.clone();
            (lo, hi)
        }
        Expr::Pow(x, y) => {
            let k = int_point(&eval_iv(y, b)?)?;
            pow_iv(&eval_iv(x, b)?, k)?
        }
    })
}

fn decide(t: &BExpr, b: &BTreeMap<String, Iv>) -> Step<bool> {
    match t {
        BExpr::True => Some(true),
        BExpr::False => Some(false),
        BExpr::Not(x) => decide(x, b).map(|v| !v),
        BExpr::And(x, y) => match (decide(x, b), decide(y, b)) {
            (Some(false), _) | (_, Some(false)) => Some(false),
            (Some(true), Some(true)) => Some(true),
            _ => None,
        },
        BExpr::Or(x, y) => match (decide(x, b), decide(y, b)) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        },
        BExpr::Cmp(op, x, y) => {
            let (lo, hi) = eval_iv(&Expr::Sub(Box::new(x.clone()), Box::new(y.clone())), b)?;
            let z = Rational::zero();
            let always = |p: &dyn Fn(&Rational) -> bool| p(&lo) && p(&hi);
            let never = |p: &dyn Fn(&Rational) -> bool| !p(&lo) && !p(&hi);
            match op {
                CmpOp::Eq if lo == z && hi == z => Some(true),
                CmpOp::Eq if lo > z || hi < z => Some(false),
                CmpOp::Ne if lo > z || hi < z => Some(true),
                CmpOp::Ne if lo == z && hi == z => Some(false),
                CmpOp::Eq | CmpOp::Ne => None,
                CmpOp::Lt if always(&|d| *d < z) => Some(true),
                CmpOp::Lt if never(&|d| *d < z) => Some(false),
                CmpOp::Le if always(&|d| *d <= z) => Some(true),
                CmpOp::Le if never(&|d| *d <= z) => Some(false),
                CmpOp::Gt if always(&|d| *d > z) => Some(true),
                CmpOp::Gt if never(&|d| *d > z) => Some(false),
                CmpOp::Ge if always(&|d| *d >= z) => Some(true),
                CmpOp::Ge if never(&|d| *d >= z) => Some(false),
                _ => None,
            }
        }
        BExpr::Forall(..) => None,
    }
}

/// The weight a guard assigns to every state of the box.
fn guard_weight(g: &Guard, h: &Hull, sr: Semiring) -> Step<Weight> {
    match g {
        Guard::Bool(t) => Some(if decide(t, &h.bounds)? { sr.one() } else { sr.zero() }),
        Guard::Const(w) => sr.coerce(w).ok(),
    }
}

fn scale(h: Hull, w: &Weight, sr: Semiring) -> Option<Hull> {
    let mass = sr.mul(&h.mass, w);
    (!sr.is_zero(&mass)).then_some(Hull { mass, ..h })
}

fn target(lv: &LValue, b: &BTreeMap<String, Iv>) -> Step<String> {
    let name = match lv {
        LValue::Var(v) => v.clone(),
        LValue::Index(a, i) => format!("{a}{}", int_point(&eval_iv(i, b)?)?),
    };
    b.contains_key(&name).then_some(name)
}

/// Runs a loop-free command on a box. `Some(None)` is the empty result.
fn run(c: &Command, h: Option<Hull>, sr: Semiring) -> Step<Option<Hull>> {
    let Some(h) = h else { return Some(None) };
    match c {
        Command::Skip => Some(Some(h)),
        Command::Assume(g) => {
            let w = guard_weight(g, &h, sr)?;
            Some(scale(h, &w, sr))
        }
        Command::Act(Action::Assign(lv, e)) => {
            let iv = eval_iv(e, &h.bounds)?;
            let name = target(lv, &h.bounds)?;
            let mut h = h;
            h.bounds.insert(name, iv);
            Some(Some(h))
        }
        Command::Act(Action::NondetFlag(lv)) => {
            if sr == Semiring::Bool {
                let name = target(lv, &h.bounds)?;
                let mut h = h;
                h.bounds.insert(name, (Rational::zero(), Rational::one()));
                Some(Some(h))
            } else {
                None
            }
        }
        Command::Seq(a, b) => {
            let mid = run(a, Some(h), sr)?;
            run(b, mid, sr)
        }
        Command::Choice(a, b) => {
            let l = run(a, Some(h.clone()), sr)?;
            let r = run(b, Some(h), sr)?;
            Some(match (l, r) {
                (None, x) | (x, None) => x,
                (Some(x), Some(y)) => Some(x.join(y, sr)?),
            })
        }
        Command::Iter(..) => None,
        Command::If(..) | Command::While(..) | Command::ProbChoice(..) => run(&c.desugar().ok()?, Some(h), sr),
    }
}

/// One exit-free loop step on a box: nothing may leave through `e2`.
/// Returns `None` when the box cannot decide the step.
pub(crate) fn step(h: &Hull, body: &Command, e1: &Guard, e2: &Guard, sr: Semiring) -> Step<Option<Hull>> {
    if !sr.is_zero(&guard_weight(e2, h, sr)?) {
        return None;
    }
    let enter = guard_weight(e1, h, sr)?;
    let entered = scale(h.clone(), &enter, sr);
    run(body, entered, sr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_bexpr, parse_program, State};
    use crate::semiring::{rat, rat_int};

    #[test]
    fn decides_on_boxes() {
        let b: BTreeMap<String, Iv> =
            [("h".to_string(), (rat(5, 2), rat(11, 4))), ("t".to_string(), point(rat_int(3)))].into();
        assert_eq!(decide(&parse_bexpr("h < t").unwrap(), &b), Some(true));
        assert_eq!(decide(&parse_bexpr("h >= t").unwrap(), &b), Some(false));
        assert_eq!(decide(&parse_bexpr("h < 8/3").unwrap(), &b), None);
    }

    #[test]
    fn steps_keep_mass() {
        let p =
            parse_program("vars t, h, k\nt := t + 1; (h := h + 1) +[1/2] (h := h + 1 + 2^(-k)); k := k + 1").unwrap();
        let body = p.core().unwrap();
        let sr = Semiring::Prob;
        let mut m = Weighting::empty(sr);
        for h in [rat(5, 2), rat(11, 4)] {
            m.set(
                crate::weighting::Outcome::State(State::from_pairs([("t", rat_int(3)), ("h", h), ("k", rat_int(2))])),
                Weight::rat(1, 8),
            );
        }
        let hull = Hull::of(&m).unwrap();
        let guard = Guard::Bool(parse_bexpr("h < t").unwrap());
        let next = step(&hull, &body, &guard, &guard.negated().unwrap(), sr).unwrap().unwrap();
        assert_eq!(next.mass, Weight::rat(1, 4));
        assert_eq!(next.bounds["h"], (rat(7, 2), rat_int(4)));
        assert_eq!(next.bounds["t"], point(rat_int(4)));
    }
}
