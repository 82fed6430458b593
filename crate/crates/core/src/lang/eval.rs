use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{BExpr, CmpOp, Expr, Guard, LangError, State};
use crate::semiring::{Rational, Semiring, SemiringError, Weight};

const MAX_EXPONENT: u32 = 4096;

fn lookup(var: &str, s: &State) -> Result<Rational, LangError> {
    s.get(var).cloned().ok_or_else(|| LangError::UnboundVariable(var.to_string()))
}

fn as_int(q: &Rational, what: &str) -> Result<BigInt, LangError> {
    if q.is_integer() {
        Ok(q.to_integer())
    } else {
        Err(LangError::Eval(format!("{what} must be an integer, got {}", crate::semiring::fmt_rational(q))))
    }
}

/// Resolves `A[e]` to the name of its scalar variable.
pub(crate) fn index_name(base: &str, idx: &Expr, s: &State) -> Result<String, LangError> {
    let i = as_int(&eval_expr(idx, s)?, "array index")?;
    Ok(format!("{base}{i}"))
}

pub fn eval_expr(e: &Expr, s: &State) -> Result<Rational, LangError> {
    Ok(match e {
        Expr::Num(q) => q.clone(),
        Expr::Var(v) => lookup(v, s)?,
        Expr::Index(a, i) => lookup(&index_name(a, i, s)?, s)?,
        Expr::Neg(a) => -eval_expr(a, s)?,
        Expr::Add(a, b) => eval_expr(a, s)? + eval_expr(b, s)?,
        Expr::Sub(a, b) => eval_expr(a, s)? - eval_expr(b, s)?,
        Expr::Mul(a, b) => eval_expr(a, s)? * eval_expr(b, s)?,
        Expr::Pow(a, b) => {
            let base = eval_expr(a, s)?;
            let exp = as_int(&eval_expr(b, s)?, "exponent")?;
            let mag = exp
                .abs()
                .to_u32()
                .filter(|m| *m <= MAX_EXPONENT)
                .ok_or_else(|| LangError::Eval(format!("exponent {exp} is too large")))?;
            let p = num_traits::pow(base.clone(), mag as usize);
            if exp.is_negative() {
                if base.is_zero() {
                    return Err(LangError::Eval("zero raised to a negative power".into()));
                }
                Rational::one() / p
            } else {
                p
            }
        }
    })
}

pub fn eval_bool(b: &BExpr, s: &State) -> Result<bool, LangError> {
    Ok(match b {
        BExpr::True => true,
        BExpr::False => false,
        BExpr::Cmp(op, x, y) => {
            let (x, y) = (eval_expr(x, s)?, eval_expr(y, s)?);
            match op {
                CmpOp::Eq => x == y,
                CmpOp::Ne => x != y,
                CmpOp::Lt => x < y,
                CmpOp::Le => x <= y,
                CmpOp::Gt => x > y,
                CmpOp::Ge => x >= y,
            }
        }
        BExpr::Not(a) => !eval_bool(a, s)?,
        BExpr::And(a, c) => eval_bool(a, s)? && eval_bool(c, s)?,
        BExpr::Or(a, c) => eval_bool(a, s)? || eval_bool(c, s)?,
        BExpr::Forall(k, lo, hi, body) => {
            let lo = as_int(&eval_expr(lo, s)?, "range bound")?;
            let hi = as_int(&eval_expr(hi, s)?, "range bound")?;
            let mut i = lo;
            while i < hi {
                let inner = s.with(k, Rational::from_integer(i.clone()));
                if !eval_bool(body, &inner)? {
                    return Ok(false);
                }
                i += 1;
            }
            true
        }
    })
}

/// A test as a semiring weight: one when it holds, zero otherwise.
pub fn eval_test(sr: Semiring, b: &BExpr, s: &State) -> Result<Weight, LangError> {
    Ok(if eval_bool(b, s)? { sr.one() } else { sr.zero() })
}

pub fn eval_guard(sr: Semiring, g: &Guard, s: &State) -> Result<Weight, LangError> {
    match g {
        Guard::Bool(b) => eval_test(sr, b, s),
        Guard::Const(w) => sr.coerce(w).map_err(|e: SemiringError| LangError::Eval(e.to_string())),
    }
}

/// True when the expression mentions no variables.
pub fn is_closed(e: &Expr) -> bool {
    let mut vs = Default::default();
    e.free_vars(&mut vs);
    vs.is_empty()
}

/// True when `e` evaluates to a non-negative number in every state, judged
/// syntactically: non-negative literals and positive-base powers combined by
/// `+` and `*`.
pub fn nonneg_increment(e: &Expr) -> bool {
    match e {
        Expr::Num(q) => !q.is_negative(),
        Expr::Pow(b, _) => matches!(&**b, Expr::Num(q) if q.is_positive()),
        Expr::Add(a, b) | Expr::Mul(a, b) => nonneg_increment(a) && nonneg_increment(b),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_bexpr;
    use crate::semiring::{rat, rat_int};

    fn st(pairs: &[(&str, i64)]) -> State {
        State::from_pairs(pairs.iter().map(|(k, v)| (*k, rat_int(*v))))
    }

    #[test]
    fn tests_as_weights() {
        let s = st(&[("x", 1), ("y", 2)]);
        let sr = Semiring::Prob;
        assert_eq!(eval_test(sr, &BExpr::True, &s).unwrap(), sr.one());
        let contra = parse_bexpr("x > 0 /\\ ~(x > 0)").unwrap();
        assert_eq!(eval_test(sr, &contra, &s).unwrap(), sr.zero());
        assert_eq!(eval_test(sr, &parse_bexpr("x + y = 3").unwrap(), &s).unwrap(), sr.one());
    }

    #[test]
    fn guards() {
        let sr = Semiring::Prob;
        let s = st(&[("i", 3), ("j", 3)]);
        assert_eq!(eval_guard(sr, &Guard::Const(Weight::rat(1, 2)), &s).unwrap(), Weight::rat(1, 2));
        assert_eq!(eval_guard(sr, &Guard::Bool(BExpr::False), &s).unwrap(), sr.zero());
        assert_eq!(eval_guard(sr, &Guard::Bool(parse_bexpr("i <= j").unwrap()), &s).unwrap(), sr.one());
    }

    #[test]
    fn boolean_homomorphism() {
        // Or maps to semiring addition, and to multiplication, not to
        // complement, over every truth assignment.
        let sr = Semiring::Bool;
        let s = State::new();
        let lits = [BExpr::True, BExpr::False];
        for a in &lits {
            let wa = eval_test(sr, a, &s).unwrap();
            let wn = eval_test(sr, &BExpr::Not(Box::new(a.clone())), &s).unwrap();
            assert_eq!(wn, if wa == sr.one() { sr.zero() } else { sr.one() });
            for b in &lits {
                let wb = eval_test(sr, b, &s).unwrap();
                let or = eval_test(sr, &BExpr::Or(Box::new(a.clone()), Box::new(b.clone())), &s).unwrap();
                let and = eval_test(sr, &BExpr::And(Box::new(a.clone()), Box::new(b.clone())), &s).unwrap();
                assert_eq!(or, sr.add(&wa, &wb).unwrap());
                assert_eq!(and, sr.mul(&wa, &wb));
            }
        }
    }

    #[test]
    fn powers_and_arrays() {
        let s = st(&[("k", 3), ("A0", 5), ("A1", 7), ("i", 1)]);
        let e = crate::lang::parse_expr("1 + 2^(-k)").unwrap();
        assert_eq!(eval_expr(&e, &s).unwrap(), rat(9, 8));
        let a = crate::lang::parse_expr("A[i] + A[i-1]").unwrap();
        assert_eq!(eval_expr(&a, &s).unwrap(), rat_int(12));
        let out = crate::lang::parse_expr("A[i+1]").unwrap();
        assert!(matches!(eval_expr(&out, &s), Err(LangError::UnboundVariable(_))));
        let forall = parse_bexpr("forall q in 0..2. A[q] >= 5").unwrap();
        assert!(eval_bool(&forall, &s).unwrap());
    }
}
