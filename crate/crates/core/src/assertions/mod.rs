//! Outcome assertions: sets of weightings described by formulas over state
//! predicates, weights and the divergence outcome.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::lang::{eval_expr, BExpr, Expr, State};
use crate::semiring::{fmt_rational, Semiring, Weight};
use crate::weighting::Outcome;

mod entail;
mod flow;
mod limits;
mod linear;
mod parse;
mod pretty;
mod sample;
mod sat;
#[cfg(test)]
mod tests;

pub use entail::{entails_guard, entails_guard_value, implies, is_nonterminating, pred_implies, Entailment};
pub use limits::{limit_of_family, ExpSum, LimitKind, LimitVerdict, Schema};
pub use parse::{parse_assertion, parse_schema};
pub use sample::{sample_models, witness_states};
pub use sat::{satisfies, split_witness, Scope, Truth};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AssertionError {
    #[error("{0}")]
    Parse(String),
    #[error("weight `{0}` is not closed")]
    OpenWeight(String),
    #[error("weight `{0}`: {1}")]
    BadWeight(String, String),
}

/// A weight term. Schema indices may occur free until instantiated.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum WExpr {
    Inf,
    /// A variable bound by `exists ... : weight`.
    Var(String),
    Num(Expr),
}

impl WExpr {
    pub fn int(n: i64) -> WExpr {
        WExpr::Num(Expr::num(n))
    }

    pub fn one() -> WExpr {
        WExpr::int(1)
    }

    pub fn zero() -> WExpr {
        WExpr::int(0)
    }

    pub fn subst(&self, var: &str, by: &Expr) -> WExpr {
        match self {
            WExpr::Num(e) => WExpr::Num(e.subst(var, by)),
            other => other.clone(),
        }
    }

    /// Evaluates a closed weight in `sr`.
    pub fn eval(&self, sr: Semiring) -> Result<Weight, AssertionError> {
        match self {
            WExpr::Inf => sr.coerce(&Weight::Inf).map_err(|e| AssertionError::BadWeight("inf".into(), e.to_string())),
            WExpr::Var(v) => Err(AssertionError::OpenWeight(v.clone())),
            WExpr::Num(e) => {
                let q = eval_expr(e, &State::new()).map_err(|_| AssertionError::OpenWeight(e.to_string()))?;
                sr.from_rational(&q).map_err(|err| AssertionError::BadWeight(fmt_rational(&q), err.to_string()))
            }
        }
    }

    fn free_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            WExpr::Num(e) => e.free_vars(out),
            WExpr::Var(v) => {
                out.insert(v.clone());
            }
            WExpr::Inf => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Assertion {
    Top,
    Bot,
    /// `P^(u)`: mass `u`, support inside `P`.
    Atom(BExpr, WExpr),
    /// `DIV^(u)`: exactly `u * top` on divergence.
    Div(WExpr),
    Not(Box<Assertion>),
    And(Box<Assertion>, Box<Assertion>),
    Or(Box<Assertion>, Box<Assertion>),
    Implies(Box<Assertion>, Box<Assertion>),
    OPlus(Vec<Assertion>),
    /// `oplus k >= lo. body`, an infinite outcome conjunction.
    OPlusAll(String, i64, Box<Assertion>),
    ScaleL(WExpr, Box<Assertion>),
    ScaleR(Box<Assertion>, WExpr),
    /// `exists k in lo..hi. body`, `hi` exclusive.
    ExistsFin(String, i64, i64, Box<Assertion>),
    /// `exists k : nat. body`.
    ExistsNat(String, Box<Assertion>),
    /// `exists u, v : weight. body`, optionally with the vector of weights nonzero.
    ExistsWeight {
        vars: Vec<String>,
        nonzero: bool,
        body: Box<Assertion>,
    },
    Singleton(Vec<(Outcome, WExpr)>),
    Box(BExpr),
    Dia(BExpr),
    BoxT(BExpr),
    DiaP(BExpr),
    AlwaysDiv,
    SometimesDiv,
    /// Support inside `P`, also allowing divergence when the flag is set.
    SuppIn(BExpr, bool),
    /// Support meets `P`, or divergence when the flag is set.
    SuppMeets(BExpr, bool),
}

pub fn oplus(parts: impl IntoIterator<Item = Assertion>) -> Assertion {
    let mut flat = Vec::new();
    for p in parts {
        match p {
            Assertion::OPlus(inner) => flat.extend(inner),
            other => flat.push(other),
        }
    }
    if flat.len() == 1 {
        flat.pop().expect("one part")
    } else {
        Assertion::OPlus(flat)
    }
}

impl Assertion {
    pub fn atom(p: BExpr) -> Assertion {
        Assertion::Atom(p, WExpr::one())
    }

    pub fn not(a: Assertion) -> Assertion {
        Assertion::Not(Box::new(a))
    }

    pub fn and(a: Assertion, b: Assertion) -> Assertion {
        Assertion::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Assertion, b: Assertion) -> Assertion {
        Assertion::Or(Box::new(a), Box::new(b))
    }

    /// The assertion `tru^(0)`, satisfied only by the zero weighting.
    pub fn nothing() -> Assertion {
        Assertion::Atom(BExpr::True, WExpr::zero())
    }

    fn map_children(&self, f: &mut impl FnMut(&Assertion) -> Assertion) -> Assertion {
        use Assertion as A;
        let b = |x: &Assertion, f: &mut dyn FnMut(&Assertion) -> Assertion| Box::new(f(x));
        match self {
            A::Not(x) => A::Not(b(x, f)),
            A::And(x, y) => A::And(b(x, f), b(y, f)),
            A::Or(x, y) => A::Or(b(x, f), b(y, f)),
            A::Implies(x, y) => A::Implies(b(x, f), b(y, f)),
            A::OPlus(xs) => A::OPlus(xs.iter().map(&mut *f).collect()),
            A::OPlusAll(k, lo, x) => A::OPlusAll(k.clone(), *lo, b(x, f)),
            A::ScaleL(u, x) => A::ScaleL(u.clone(), b(x, f)),
            A::ScaleR(x, u) => A::ScaleR(b(x, f), u.clone()),
            A::ExistsFin(k, lo, hi, x) => A::ExistsFin(k.clone(), *lo, *hi, b(x, f)),
            A::ExistsNat(k, x) => A::ExistsNat(k.clone(), b(x, f)),
            A::ExistsWeight { vars, nonzero, body } => {
                A::ExistsWeight { vars: vars.clone(), nonzero: *nonzero, body: b(body, f) }
            }
            leaf => leaf.clone(),
        }
    }

    /// Replaces the free index `var` by `by` in predicates and weights.
    pub fn subst(&self, var: &str, by: &Expr) -> Assertion {
        use Assertion as A;
        match self {
            A::Atom(p, u) => A::Atom(p.subst(var, by), u.subst(var, by)),
            A::Div(u) => A::Div(u.subst(var, by)),
            A::ScaleL(u, x) => A::ScaleL(u.subst(var, by), Box::new(x.subst(var, by))),
            A::ScaleR(x, u) => A::ScaleR(Box::new(x.subst(var, by)), u.subst(var, by)),
            A::Singleton(es) => A::Singleton(es.iter().map(|(o, w)| (o.clone(), w.subst(var, by))).collect()),
            A::Box(p) => A::Box(p.subst(var, by)),
            A::Dia(p) => A::Dia(p.subst(var, by)),
            A::BoxT(p) => A::BoxT(p.subst(var, by)),
            A::DiaP(p) => A::DiaP(p.subst(var, by)),
            A::SuppIn(p, d) => A::SuppIn(p.subst(var, by), *d),
            A::SuppMeets(p, d) => A::SuppMeets(p.subst(var, by), *d),
            A::OPlusAll(k, _, _) | A::ExistsFin(k, ..) | A::ExistsNat(k, _) if k == var => self.clone(),
            A::ExistsWeight { vars, .. } if vars.iter().any(|v| v == var) => self.clone(),
            other => other.map_children(&mut |x| x.subst(var, by)),
        }
    }

    /// Replaces the weight variable `var` by `by`.
    pub fn subst_weight(&self, var: &str, by: &WExpr) -> Assertion {
        use Assertion as A;
        let w = |u: &WExpr| if *u == WExpr::Var(var.into()) { by.clone() } else { u.clone() };
        match self {
            A::Atom(p, u) => A::Atom(p.clone(), w(u)),
            A::Div(u) => A::Div(w(u)),
            A::ScaleL(u, x) => A::ScaleL(w(u), Box::new(x.subst_weight(var, by))),
            A::ScaleR(x, u) => A::ScaleR(Box::new(x.subst_weight(var, by)), w(u)),
            A::Singleton(es) => A::Singleton(es.iter().map(|(o, u)| (o.clone(), w(u))).collect()),
            A::ExistsWeight { vars, .. } if vars.iter().any(|v| v == var) => self.clone(),
            other => other.map_children(&mut |x| x.subst_weight(var, by)),
        }
    }

    /// Substitutes an integer for the schema index.
    pub fn instantiate(&self, var: &str, n: i64) -> Assertion {
        self.subst(var, &Expr::num(n))
    }

    /// Free variables of predicates and weights, excluding bound indices.
    pub fn free_vars(&self) -> BTreeSet<String> {
        use Assertion as A;
        let mut out = BTreeSet::new();
        match self {
            A::Top | A::Bot | A::AlwaysDiv | A::SometimesDiv => {}
            A::Atom(p, u) => {
                p.free_vars(&mut out);
                u.free_vars(&mut out);
            }
            A::Div(u) => u.free_vars(&mut out),
            A::Box(p) | A::Dia(p) | A::BoxT(p) | A::DiaP(p) | A::SuppIn(p, _) | A::SuppMeets(p, _) => {
                p.free_vars(&mut out)
            }
            A::Singleton(es) => es.iter().for_each(|(_, w)| w.free_vars(&mut out)),
            A::Not(x) => out = x.free_vars(),
            A::And(x, y) | A::Or(x, y) | A::Implies(x, y) => {
                out = x.free_vars();
                out.extend(y.free_vars());
            }
            A::OPlus(xs) => xs.iter().for_each(|x| out.extend(x.free_vars())),
            A::ScaleL(u, x) | A::ScaleR(x, u) => {
                out = x.free_vars();
                u.free_vars(&mut out);
            }
            A::OPlusAll(k, _, x) | A::ExistsFin(k, _, _, x) | A::ExistsNat(k, x) => {
                out = x.free_vars();
                out.remove(k);
            }
            A::ExistsWeight { vars, body, .. } => {
                out = body.free_vars();
                for v in vars {
                    out.remove(v);
                }
            }
        }
        out
    }

    /// Rewrites the modalities into their support characterizations.
    pub fn expand_modal(&self) -> Assertion {
        use Assertion as A;
        match self {
            A::Box(p) => A::SuppIn(p.clone(), true),
            A::BoxT(p) => A::SuppIn(p.clone(), false),
            A::Dia(p) => A::SuppMeets(p.clone(), false),
            A::DiaP(p) => A::SuppMeets(p.clone(), true),
            A::AlwaysDiv => A::SuppIn(BExpr::False, true),
            A::SometimesDiv => A::SuppMeets(BExpr::False, true),
            other => other.map_children(&mut |x| x.expand_modal()),
        }
    }

    /// Rewrites the modalities into their quantified weight definitions.
    pub fn definitional(&self) -> Assertion {
        use Assertion as A;
        let u = || WExpr::Var("u".into());
        let v = || WExpr::Var("v".into());
        let ex = |vars: &[&str], nonzero, body| A::ExistsWeight {
            vars: vars.iter().map(|s| s.to_string()).collect(),
            nonzero,
            body: Box::new(body),
        };
        match self {
            A::Box(p) => ex(&["u", "v"], false, oplus([A::Atom(p.clone(), u()), A::Div(v())])),
            A::BoxT(p) => ex(&["u"], false, A::Atom(p.clone(), u())),
            A::Dia(p) => ex(&["u"], true, oplus([A::Atom(p.clone(), u()), A::Top])),
            A::DiaP(p) => ex(&["u", "v"], true, oplus([A::Atom(p.clone(), u()), A::Div(v()), A::Top])),
            A::AlwaysDiv => ex(&["u"], false, A::Div(u())),
            A::SometimesDiv => ex(&["u"], true, oplus([A::Div(u()), A::Top])),
            other => other.map_children(&mut |x| x.definitional()),
        }
    }

    /// Flattens outcome conjunctions, drops `P^(0)` parts and unit weights.
    pub fn normalize(&self) -> Assertion {
        use Assertion as A;
        match self {
            A::OPlus(xs) => {
                let parts: Vec<Assertion> = xs.iter().map(|x| x.normalize()).filter(|x| !x.is_nothing()).collect();
                match parts.len() {
                    0 => A::nothing(),
                    _ => oplus(parts),
                }
            }
            A::Atom(_, u) if is_zero_weight(u) => A::nothing(),
            A::Div(u) if is_zero_weight(u) => A::nothing(),
            A::Atom(p, u) => A::Atom(p.clone(), simplify_weight(u)),
            A::Div(u) => A::Div(simplify_weight(u)),
            A::ScaleL(u, x) | A::ScaleR(x, u) if simplify_weight(u) == WExpr::one() => x.normalize(),
            A::ScaleL(u, x) | A::ScaleR(x, u) if **x == A::Top && is_zero_weight(u) => A::nothing(),
            other => other.map_children(&mut |x| x.normalize()),
        }
    }

    /// Whether this is syntactically the zero-weighting assertion.
    pub fn is_nothing(&self) -> bool {
        match self {
            Assertion::Atom(_, u) | Assertion::Div(u) => is_zero_weight(u),
            Assertion::OPlus(xs) => xs.iter().all(Assertion::is_nothing),
            _ => false,
        }
    }

    /// The parts of an outcome conjunction.
    pub fn summands(&self) -> Vec<&Assertion> {
        match self {
            Assertion::OPlus(xs) => xs.iter().flat_map(Assertion::summands).collect(),
            other => vec![other],
        }
    }
}

fn closed_value(u: &WExpr) -> Option<crate::semiring::Rational> {
    match u {
        WExpr::Num(e) => eval_expr(e, &State::new()).ok(),
        _ => None,
    }
}

pub(crate) fn is_zero_weight(u: &WExpr) -> bool {
    closed_value(u).is_some_and(|q| q == Default::default())
}

fn simplify_weight(u: &WExpr) -> WExpr {
    match closed_value(u) {
        Some(q) => WExpr::Num(Expr::Num(q)),
        None => u.clone(),
    }
}

impl fmt::Display for WExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WExpr::Inf => write!(f, "inf"),
            WExpr::Var(v) => write!(f, "{v}"),
            WExpr::Num(e) => write!(f, "{e}"),
        }
    }
}
