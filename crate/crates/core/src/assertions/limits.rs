//! Indexed assertion families and their certified limits.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{implies, oplus, Assertion, Scope, Truth, WExpr};
use crate::lang::{eval_expr, Expr, State};
use crate::semiring::{fmt_rational, Rational, Semiring, Weight};

/// A family `n ↦ φ_n` given by explicit cases and a default template.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    pub index: String,
    pub cases: BTreeMap<u64, Assertion>,
    pub default: Assertion,
    pub limit: Option<Assertion>,
}

impl Schema {
    pub fn uniform(index: &str, body: Assertion) -> Schema {
        Schema { index: index.into(), cases: BTreeMap::new(), default: body, limit: None }
    }

    pub fn instantiate(&self, n: u64) -> Assertion {
        match self.cases.get(&n) {
            Some(a) => a.clone(),
            None => self.default.instantiate(&self.index, n as i64),
        }
    }

    /// First index from which the default template applies.
    pub fn tail_start(&self) -> u64 {
        self.cases.keys().next_back().map_or(0, |k| k + 1)
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "family {}: ", self.index)?;
        for (k, a) in &self.cases {
            write!(f, "case {k}: {a}; ")?;
        }
        write!(f, "{}", self.default)?;
        if let Some(l) = &self.limit {
            write!(f, "; limit: {l}")?;
        }
        Ok(())
    }
}

fn qpow(q: &Rational, k: i64) -> Option<Rational> {
    if k < 0 && q.is_zero() {
        return None;
    }
    let base = if k < 0 { q.recip() } else { q.clone() };
    let mut acc = Rational::one();
    for _ in 0..k.unsigned_abs() {
        acc *= &base;
    }
    Some(acc)
}

/// `Σ c·r^n`, keyed by ratio `r`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ExpSum(BTreeMap<Rational, Rational>);

/// `a·n + b` with rational coefficients.
fn affine(e: &Expr, n: &str) -> Option<(Rational, Rational)> {
    Some(match e {
        Expr::Num(q) => (Rational::zero(), q.clone()),
        Expr::Var(v) if v == n => (Rational::one(), Rational::zero()),
        Expr::Neg(a) => {
            let (x, y) = affine(a, n)?;
            (-x, -y)
        }
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            let ((x1, y1), (x2, y2)) = (affine(a, n)?, affine(b, n)?);
            if matches!(e, Expr::Add(..)) {
                (x1 + x2, y1 + y2)
            } else {
                (x1 - x2, y1 - y2)
            }
        }
        Expr::Mul(a, b) => {
            let ((x1, y1), (x2, y2)) = (affine(a, n)?, affine(b, n)?);
            if x1.is_zero() {
                (x2 * &y1, y1 * y2)
            } else if x2.is_zero() {
                (x1 * &y2, y1 * y2)
            } else {
                return None;
            }
        }
        _ => return None,
    })
}

impl ExpSum {
    pub fn constant(c: Rational) -> ExpSum {
        ExpSum::term(Rational::one(), c)
    }

    fn term(r: Rational, c: Rational) -> ExpSum {
        let mut m = BTreeMap::new();
        if !c.is_zero() {
            m.insert(r, c);
        }
        ExpSum(m)
    }

    /// Reads `e` as a sum of geometric terms in the index `n`.
    pub fn from_expr(e: &Expr, n: &str) -> Option<ExpSum> {
        Some(match e {
            Expr::Num(q) => ExpSum::constant(q.clone()),
            Expr::Neg(a) => ExpSum::from_expr(a, n)?.scale(&-Rational::one()),
            Expr::Add(a, b) => ExpSum::from_expr(a, n)?.add(&ExpSum::from_expr(b, n)?),
            Expr::Sub(a, b) => ExpSum::from_expr(a, n)?.add(&ExpSum::from_expr(b, n)?.scale(&-Rational::one())),
            Expr::Mul(a, b) => ExpSum::from_expr(a, n)?.mul(&ExpSum::from_expr(b, n)?),
            Expr::Pow(base, exp) => {
                let base = eval_expr(base, &State::new()).ok()?;
                let (a, b) = affine(exp, n)?;
                if !a.is_integer() || !b.is_integer() {
                    return None;
                }
                let (a, b) = (a.to_integer().to_i64()?, b.to_integer().to_i64()?);
                ExpSum::term(qpow(&base, a)?, qpow(&base, b)?)
            }
            _ => return None,
        })
    }

    pub fn from_weight(u: &WExpr, n: &str) -> Option<ExpSum> {
        match u {
            WExpr::Num(e) => ExpSum::from_expr(e, n),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Rational, &Rational)> {
        self.0.iter()
    }

    pub fn add(&self, other: &ExpSum) -> ExpSum {
        let mut m = self.0.clone();
        for (r, c) in &other.0 {
            let v = m.remove(r).unwrap_or_default() + c;
            if !v.is_zero() {
                m.insert(r.clone(), v);
            }
        }
        ExpSum(m)
    }

    pub fn scale(&self, k: &Rational) -> ExpSum {
        self.mul(&ExpSum::constant(k.clone()))
    }

    pub fn mul(&self, other: &ExpSum) -> ExpSum {
        let mut acc = ExpSum::default();
        for (r1, c1) in &self.0 {
            for (r2, c2) in &other.0 {
                acc = acc.add(&ExpSum::term(r1 * r2, c1 * c2));
            }
        }
        acc
    }

    pub fn eval(&self, n: u64) -> Rational {
        self.0.iter().map(|(r, c)| c * qpow(r, n as i64).expect("nonnegative power")).sum()
    }

    /// `Σ_{n ≥ n0} f(n)` when every ratio lies in `[0, 1)`.
    pub fn tail_sum(&self, n0: u64) -> Option<Rational> {
        let mut total = Rational::zero();
        for (r, c) in &self.0 {
            if r.is_negative() || *r >= Rational::one() {
                return None;
            }
            total += c * qpow(r, n0 as i64)? / (Rational::one() - r);
        }
        Some(total)
    }

    /// `inf_{n ≥ n0} f(n)` when every ratio lies in `[0, 1]`.
    pub fn inf_from(&self, n0: u64) -> Option<Rational> {
        if self.0.keys().any(|r| r.is_negative() || *r > Rational::one()) {
            return None;
        }
        let limit = self.0.get(&Rational::one()).cloned().unwrap_or_default();
        let decaying: Vec<(&Rational, &Rational)> =
            self.0.iter().filter(|(r, _)| !r.is_zero() && !r.is_one()).collect();
        let start = n0.max(1);
        let mut best = if n0 == 0 { Some(self.eval(0)) } else { None };
        let Some((rho, lead)) = decaying.last().map(|(r, c)| ((*r).clone(), (*c).clone())) else {
            return Some(best.map_or(limit.clone(), |b| b.min(limit)));
        };
        let bound: Rational = decaying.iter().map(|(_, c)| c.abs()).sum();
        let others: Vec<(Rational, Rational)> =
            decaying[..decaying.len() - 1].iter().map(|(r, c)| (*r / &rho, c.abs())).collect();
        let mut n = start;
        for _ in 0..100_000 {
            let v = self.eval(n);
            best = Some(best.map_or(v.clone(), |b| b.min(v)));
            let b = best.clone().expect("set");
            let done = if lead.is_positive() {
                let rest: Rational = others.iter().map(|(q, c)| c * qpow(q, n as i64).expect("ratio")).sum();
                rest < lead
            } else {
                b < limit && &bound * qpow(&rho, n as i64).expect("ratio") < &limit - &b
            };
            if done {
                return Some(if lead.is_positive() { b.min(limit) } else { b });
            }
            n += 1;
        }
        None
    }

    pub fn to_expr(&self, n: &str) -> Expr {
        let mut terms = self.0.iter().map(|(r, c)| {
            let k = Expr::Num(c.clone());
            if r.is_one() {
                k
            } else {
                Expr::Mul(Box::new(k), Box::new(Expr::Pow(Box::new(Expr::Num(r.clone())), Box::new(Expr::var(n)))))
            }
        });
        match terms.next() {
            None => Expr::num(0),
            Some(first) => terms.fold(first, |a, b| Expr::Add(Box::new(a), Box::new(b))),
        }
    }
}

impl fmt::Display for ExpSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> =
            self.0.iter().map(|(r, c)| format!("{}*({})^n", fmt_rational(c), fmt_rational(r))).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LimitKind {
    /// `(ψ_n) ⇝ ψ_∞`: the outcome conjunction of all members.
    Converge,
    /// `(φ_n) ⇑ ζ_∞`: divergence weighted by the infimum of masses.
    Diverge,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LimitVerdict {
    Certified(Assertion),
    /// No closed form was recognized; `notes` lists what held for `n ≤ checked_up_to`.
    Obligation {
        checked_up_to: u64,
        notes: Vec<String>,
    },
}

/// Total mass of `φ` as a function of the index, in units of top for divergence.
fn mass_of(phi: &Assertion, n: &str) -> Option<ExpSum> {
    use Assertion as A;
    match phi {
        A::Atom(_, u) | A::Div(u) => ExpSum::from_weight(u, n),
        A::OPlus(xs) => xs.iter().try_fold(ExpSum::default(), |acc, x| Some(acc.add(&mass_of(x, n)?))),
        A::ScaleL(u, x) | A::ScaleR(x, u) => Some(ExpSum::from_weight(u, n)?.mul(&mass_of(x, n)?)),
        _ => None,
    }
}

fn is_atom(phi: &Assertion) -> bool {
    matches!(phi, Assertion::Atom(..)) || phi.is_nothing()
}

/// Structural equality, comparing weights as functions of their index.
fn same_up_to_weights(a: &Assertion, b: &Assertion, n: &str) -> bool {
    use Assertion as A;
    let w_eq = |u: &WExpr, v: &WExpr| {
        u == v || matches!((ExpSum::from_weight(u, n), ExpSum::from_weight(v, n)), (Some(x), Some(y)) if x == y)
    };
    match (a, b) {
        (A::Atom(p, u), A::Atom(q, v)) => p == q && w_eq(u, v),
        (A::Div(u), A::Div(v)) => w_eq(u, v),
        (A::OPlus(xs), A::OPlus(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| same_up_to_weights(x, y, n))
        }
        (A::OPlusAll(k, lo, x), A::OPlusAll(j, lo2, y)) if lo == lo2 => {
            let y = y.subst(j, &Expr::var(k));
            same_up_to_weights(x, &y, k)
        }
        _ => a.normalize() == b.normalize(),
    }
}

fn check_instances(s: &Schema, bound: u64, sr: Semiring, notes: &mut Vec<String>) -> u64 {
    let mut checked = 0;
    for n in 0..=bound {
        let phi = s.instantiate(n);
        match mass_of(&phi, &s.index).map(|m| m.eval(0)) {
            Some(q) if sr.from_rational(&q).is_ok() || sr == Semiring::Bool => {
                notes.push(format!("n={n}: mass {}", fmt_rational(&q)));
                checked = n;
            }
            _ => {
                notes.push(format!("n={n}: `{phi}` has no closed mass"));
                break;
            }
        }
    }
    checked
}

fn accept_declared(s: &Schema, computed: Assertion, scope: &Scope, notes: &mut Vec<String>) -> Option<Assertion> {
    let Some(declared) = &s.limit else {
        return Some(computed);
    };
    if same_up_to_weights(&computed, declared, &s.index) {
        return Some(declared.clone());
    }
    match implies(&computed, declared, scope) {
        Truth::Yes => Some(declared.clone()),
        t => {
            notes.push(format!("computed limit `{computed}` does not establish `{declared}` ({t:?})"));
            None
        }
    }
}

/// Certifies the limit of `s` when its members follow a recognized closed form.
pub fn limit_of_family(s: &Schema, kind: LimitKind, check_bound: u64, scope: &Scope) -> LimitVerdict {
    let mut notes = Vec::new();
    let checked = check_instances(s, check_bound, scope.sr, &mut notes);
    let certified = match kind {
        LimitKind::Converge => converge(s, scope, &mut notes),
        LimitKind::Diverge => diverge(s, scope, &mut notes),
    };
    match certified.and_then(|c| accept_declared(s, c, scope, &mut notes)) {
        Some(l) => LimitVerdict::Certified(l),
        None => LimitVerdict::Obligation { checked_up_to: checked, notes },
    }
}

fn converge(s: &Schema, scope: &Scope, notes: &mut Vec<String>) -> Option<Assertion> {
    let sr = scope.sr;
    if !s.cases.values().all(is_atom) || !is_atom(&s.default) {
        notes.push("members are not all atoms".into());
        return None;
    }
    let n0 = s.tail_start();
    let head: Vec<Assertion> = s.cases.values().filter(|a| !a.is_nothing()).cloned().collect();
    let tail_mass = mass_of(&s.default, &s.index);
    let head_only = || if head.is_empty() { Assertion::nothing() } else { oplus(head.clone()) };
    if s.default.is_nothing() || tail_mass.as_ref().is_some_and(ExpSum::is_zero) {
        return Some(head_only());
    }
    let tail = Assertion::OPlusAll(s.index.clone(), n0 as i64, Box::new(s.default.clone()));
    let mut parts = head.clone();
    parts.push(tail);
    match sr {
        Semiring::Bool => Some(oplus(parts)),
        Semiring::Prob => {
            let Some(t) = tail_mass.as_ref().and_then(|m| m.tail_sum(n0)) else {
                notes.push("tail weights are not a convergent geometric sum".into());
                return None;
            };
            let head_mass: Rational = head.iter().filter_map(|a| mass_of(a, &s.index)).map(|m| m.eval(0)).sum();
            let total = head_mass + t;
            if total > Rational::one() {
                notes.push(format!("total mass {} exceeds 1", fmt_rational(&total)));
                return None;
            }
            notes.push(format!("total mass {}", fmt_rational(&total)));
            Some(oplus(parts))
        }
        _ => {
            notes.push(format!("infinite sums of nonzero weights do not converge in {}", sr.name()));
            None
        }
    }
}

fn diverge(s: &Schema, scope: &Scope, notes: &mut Vec<String>) -> Option<Assertion> {
    let sr = scope.sr;
    let mut inf: Option<Rational> = None;
    for a in s.cases.values() {
        let Some(m) = mass_of(a, &s.index).or_else(|| a.is_nothing().then(ExpSum::default)) else {
            notes.push(format!("`{a}` has no closed mass"));
            return None;
        };
        let v = m.eval(0);
        inf = Some(inf.map_or(v.clone(), |x| x.min(v)));
    }
    let tail = match mass_of(&s.default, &s.index) {
        Some(m) => m,
        None if s.default.is_nothing() => ExpSum::default(),
        None => {
            notes.push(format!("`{}` has no closed mass", s.default));
            return None;
        }
    };
    let Some(t) = tail.inf_from(s.tail_start()) else {
        notes.push(format!("no closed infimum for mass {tail}"));
        return None;
    };
    let l = inf.map_or(t.clone(), |x| x.min(t));
    notes.push(format!("infimum of masses {}", fmt_rational(&l)));
    let w = if sr == Semiring::Bool {
        Weight::Bool(!l.is_zero())
    } else {
        match sr.from_rational(&l) {
            Ok(w) => w,
            Err(e) => {
                notes.push(e.to_string());
                return None;
            }
        }
    };
    let u = match w.to_rational() {
        Some(q) => WExpr::Num(Expr::Num(q)),
        None => WExpr::Inf,
    };
    Some(Assertion::Div(u).normalize())
}
