use std::fmt;

use super::{Assertion, WExpr};
use crate::lang::Expr;

fn prec(a: &Assertion) -> u8 {
    use Assertion as A;
    match a {
        A::Implies(..) => 0,
        A::Or(..) => 1,
        A::And(..) => 2,
        A::OPlus(..) => 3,
        A::Not(_) | A::ScaleL(..) => 4,
        A::OPlusAll(..)
        | A::ExistsFin(..)
        | A::ExistsNat(..)
        | A::ExistsWeight { .. }
        | A::Box(_)
        | A::Dia(_)
        | A::BoxT(_)
        | A::DiaP(_)
        | A::SuppIn(..)
        | A::SuppMeets(..) => 0,
        _ => 5,
    }
}

fn wrap(a: &Assertion, min: u8) -> String {
    if prec(a) < min {
        format!("({a})")
    } else {
        a.to_string()
    }
}

fn is_one(u: &WExpr) -> bool {
    matches!(u, WExpr::Num(Expr::Num(q)) if *q == crate::semiring::rat_int(1))
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Assertion as A;
        match self {
            A::Top => write!(f, "TOP"),
            A::Bot => write!(f, "BOT"),
            A::Atom(p, u) if is_one(u) => write!(f, "({p})"),
            A::Atom(p, u) => write!(f, "({p})^({u})"),
            A::Div(u) if is_one(u) => write!(f, "DIV"),
            A::Div(u) => write!(f, "DIV^({u})"),
            A::Not(x) => write!(f, "~{}", wrap(x, 4)),
            A::And(x, y) => write!(f, "{} /\\ {}", wrap(x, 2), wrap(y, 3)),
            A::Or(x, y) => write!(f, "{} \\/ {}", wrap(x, 1), wrap(y, 2)),
            A::Implies(x, y) => write!(f, "{} => {}", wrap(x, 1), y),
            A::OPlus(xs) => {
                let parts: Vec<String> = xs.iter().map(|x| wrap(x, 4)).collect();
                write!(f, "{}", parts.join(" ++ "))
            }
            A::OPlusAll(k, lo, x) => write!(f, "oplus {k} >= {lo}. {x}"),
            A::ScaleL(u, x) => write!(f, "[{u}] * {}", wrap(x, 4)),
            A::ScaleR(x, u) => write!(f, "{} * [{u}]", wrap(x, 5)),
            A::ExistsFin(k, lo, hi, x) => write!(f, "exists {k} in {lo}..{hi}. {x}"),
            A::ExistsNat(k, x) => write!(f, "exists {k} : nat. {x}"),
            A::ExistsWeight { vars, nonzero, body } => {
                let nz = if *nonzero { " != 0" } else { "" };
                write!(f, "exists {} : weight{nz}. {body}", vars.join(", "))
            }
            A::Singleton(es) => {
                let parts: Vec<String> = es.iter().map(|(o, w)| format!("{o}: {w}")).collect();
                write!(f, "one{{{}}}", parts.join(", "))
            }
            A::Box(p) => write!(f, "box {p}"),
            A::Dia(p) => write!(f, "dia {p}"),
            A::BoxT(p) => write!(f, "boxT {p}"),
            A::DiaP(p) => write!(f, "diaP {p}"),
            A::AlwaysDiv => write!(f, "box DIV"),
            A::SometimesDiv => write!(f, "dia DIV"),
            A::SuppIn(p, false) => write!(f, "supp_in {p}"),
            A::SuppIn(p, true) => write!(f, "supp_in_div {p}"),
            A::SuppMeets(p, false) => write!(f, "supp_meets {p}"),
            A::SuppMeets(p, true) => write!(f, "supp_meets_div {p}"),
        }
    }
}
