//! Linear arithmetic over the rationals by Fourier–Motzkin elimination.
//!
//! Nonlinear subterms (array reads, products of variables, powers with a
//! variable exponent) are abstracted to fresh unknowns, so an unsatisfiable
//! verdict is sound for the original predicate.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::lang::{eval_expr, BExpr, CmpOp, Expr, State};
use crate::semiring::Rational;

/// Largest constraint set kept during elimination.
const MAX_CONSTRAINTS: usize = 400;
/// Largest number of disjuncts explored.
const MAX_CASES: usize = 64;

/// `Σ c·t + k` over terms keyed by their printed form.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Lin {
    coeffs: BTreeMap<String, Rational>,
    k: Rational,
}

impl Lin {
    fn constant(k: Rational) -> Lin {
        Lin { coeffs: BTreeMap::new(), k }
    }

    fn term(t: String) -> Lin {
        Lin { coeffs: BTreeMap::from([(t, Rational::one())]), k: Rational::zero() }
    }

    fn add(mut self, other: &Lin, sign: &Rational) -> Lin {
        for (t, c) in &other.coeffs {
            let e = self.coeffs.entry(t.clone()).or_insert_with(Rational::zero);
            *e += c * sign;
            if e.is_zero() {
                self.coeffs.remove(t);
            }
        }
        self.k += &other.k * sign;
        self
    }

    fn scale(mut self, c: &Rational) -> Lin {
        if c.is_zero() {
            return Lin::default();
        }
        for v in self.coeffs.values_mut() {
            *v *= c;
        }
        self.k *= c;
        self
    }

    fn as_constant(&self) -> Option<&Rational> {
        self.coeffs.is_empty().then_some(&self.k)
    }
}

fn linearize(e: &Expr) -> Lin {
    let one = Rational::one();
    match e {
        Expr::Num(q) => Lin::constant(q.clone()),
        Expr::Var(v) => Lin::term(v.clone()),
        Expr::Neg(a) => linearize(a).scale(&-one),
        Expr::Add(a, b) => linearize(a).add(&linearize(b), &one),
        Expr::Sub(a, b) => linearize(a).add(&linearize(b), &-one),
        Expr::Mul(a, b) => {
            let (x, y) = (linearize(a), linearize(b));
            match (x.as_constant(), y.as_constant()) {
                (Some(c), _) => y.clone().scale(c),
                (_, Some(c)) => x.clone().scale(c),
                _ => Lin::term(e.to_string()),
            }
        }
        _ => match eval_expr(e, &State::new()) {
            Ok(q) => Lin::constant(q),
            Err(_) => Lin::term(e.to_string()),
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Rel {
    Eq,
    Le,
    Lt,
}

/// `lin rel 0`.
#[derive(Clone, Debug)]
struct Con {
    lin: Lin,
    rel: Rel,
}

/// Literals of `b` (or its negation) in disjunctive normal form; `None`
/// when the expansion is too large. Unsupported atoms are dropped, which
/// only weakens the formula.
fn dnf(b: &BExpr, positive: bool) -> Option<Vec<Vec<Con>>> {
    let one = Rational::one();
    match b {
        BExpr::True if positive => Some(vec![vec![]]),
        BExpr::True => Some(vec![]),
        BExpr::False if positive => Some(vec![]),
        BExpr::False => Some(vec![vec![]]),
        BExpr::Not(x) => dnf(x, !positive),
        BExpr::And(x, y) | BExpr::Or(x, y) => {
            let conj = matches!(b, BExpr::And(..)) == positive;
            let (l, r) = (dnf(x, positive)?, dnf(y, positive)?);
            if conj {
                if l.len() * r.len() > MAX_CASES {
                    return None;
                }
                Some(l.iter().flat_map(|a| r.iter().map(move |c| a.iter().chain(c).cloned().collect())).collect())
            } else {
                let mut out = l;
                out.extend(r);
                (out.len() <= MAX_CASES).then_some(out)
            }
        }
        BExpr::Cmp(op, a, c) => {
            let d = linearize(a).add(&linearize(c), &-one.clone());
            let neg = d.clone().scale(&-one);
            let op = if positive { *op } else { negate(*op) };
            let con = |lin: &Lin, rel| Con { lin: lin.clone(), rel };
            Some(match op {
                CmpOp::Eq => vec![vec![con(&d, Rel::Eq)]],
                CmpOp::Le => vec![vec![con(&d, Rel::Le)]],
                CmpOp::Lt => vec![vec![con(&d, Rel::Lt)]],
                CmpOp::Ge => vec![vec![con(&neg, Rel::Le)]],
                CmpOp::Gt => vec![vec![con(&neg, Rel::Lt)]],
                CmpOp::Ne => vec![vec![con(&d, Rel::Lt)], vec![con(&neg, Rel::Lt)]],
            })
        }
        _ => Some(vec![vec![]]),
    }
}

fn negate(op: CmpOp) -> CmpOp {
    match op {
        CmpOp::Eq => CmpOp::Ne,
        CmpOp::Ne => CmpOp::Eq,
        CmpOp::Lt => CmpOp::Ge,
        CmpOp::Le => CmpOp::Gt,
        CmpOp::Gt => CmpOp::Le,
        CmpOp::Ge => CmpOp::Lt,
    }
}

fn trivially_false(c: &Con) -> bool {
    match c.lin.as_constant() {
        Some(k) => match c.rel {
            Rel::Eq => !k.is_zero(),
            Rel::Le => k.is_positive(),
            Rel::Lt => !k.is_negative(),
        },
        None => false,
    }
}

/// Whether the conjunction has no rational solution; `None` when the
/// elimination grows past its bound.
fn infeasible(mut cons: Vec<Con>) -> Option<bool> {
    loop {
        if cons.iter().any(trivially_false) {
            return Some(true);
        }
        cons.retain(|c| c.lin.as_constant().is_none());
        let Some(var) = cons.iter().flat_map(|c| c.lin.coeffs.keys()).next().cloned() else {
            return Some(false);
        };
        if let Some(pos) = cons.iter().position(|c| c.rel == Rel::Eq && c.lin.coeffs.contains_key(&var)) {
            let eq = cons.swap_remove(pos);
            let a = eq.lin.coeffs[&var].clone();
            cons = cons
                .into_iter()
                .map(|c| match c.lin.coeffs.get(&var).cloned() {
                    Some(b) => Con { lin: c.lin.add(&eq.lin, &-(b / &a)), rel: c.rel },
                    None => c,
                })
                .collect();
            continue;
        }
        let (mut upper, mut lower, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for c in cons {
            match c.lin.coeffs.get(&var).cloned() {
                Some(a) if a.is_positive() => upper.push((a, c)),
                Some(a) => lower.push((a, c)),
                None => rest.push(c),
            }
        }
        for (a, u) in &upper {
            for (b, l) in &lower {
                let lin = u.lin.clone().scale(&-b.clone()).add(&l.lin, a);
                let rel = if u.rel == Rel::Lt || l.rel == Rel::Lt { Rel::Lt } else { Rel::Le };
                rest.push(Con { lin, rel });
            }
        }
        if rest.len() > MAX_CONSTRAINTS {
            return None;
        }
        cons = rest;
    }
}

/// Proves `P ⇒ Q` over rational-valued states by refuting `P ∧ ¬Q`.
/// Returns `false` when no proof is found, never a refutation.
pub(crate) fn proves_implication(p: &BExpr, q: &BExpr) -> bool {
    let (Some(ps), Some(nq)) = (dnf(p, true), dnf(q, false)) else {
        return false;
    };
    if ps.len() * nq.len() > MAX_CASES {
        return false;
    }
    ps.iter().all(|a| nq.iter().all(|b| infeasible(a.iter().chain(b).cloned().collect()) == Some(true)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_bexpr;

    fn imp(p: &str, q: &str) -> bool {
        proves_implication(&parse_bexpr(p).unwrap(), &parse_bexpr(q).unwrap())
    }

    #[test]
    fn linear_facts() {
        assert!(imp("x = 1 /\\ y = 2", "x + y = 3"));
        assert!(imp("(3 - x) + (3 - y) = 3", "x + y = 3"));
        assert!(imp("t - h = 1/16 /\\ k = 4", "h < t"));
        assert!(imp("i <= j", "j - i + 1 > 0"));
        assert!(imp("x > 2 \\/ x < -2", "x != 0"));
        assert!(!imp("x >= 0", "x > 0"));
        assert!(!imp("i <= j", "j - i > 0"));
        assert!(imp("A[i] <= p /\\ p < 2", "A[i] < 2"));
        assert!(!imp("x * y = 1", "x = 1"));
    }
}
