//! Weights and the semiring instances they are drawn from.
//!
//! Three carriers are supported: booleans, exact rationals in `[0, 1]` with a
//! partial addition, and arbitrary-precision naturals with an adjoined
//! absorbing infinity.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Rational = BigRational;

/// An element of one of the supported carriers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Weight {
    Bool(bool),
    Rat(Rational),
    Nat(BigUint),
    /// The adjoined strong infinity `w`.
    Inf,
}

/// How nontermination is weighted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Total mass is fixed at `top`; `x + top` is undefined for `x != 0`.
    Conservative,
    /// `top` is a strong infinity and flags divergence.
    Indicative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Semiring {
    Bool,
    Prob,
    Nat,
    NatInf,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SemiringError {
    #[error("sum {0} + {1} is undefined in {2}")]
    Undefined(Weight, Weight, &'static str),
    #[error("{0} is not an element of {1}")]
    NotInCarrier(String, &'static str),
    #[error("{0} already has a strong infinity")]
    AlreadyInfinite(&'static str),
    #[error("{0} is partial, cannot adjoin an infinity")]
    Partial(&'static str),
    #[error("unknown semiring `{0}` (expected bool, prob, nat or nat-inf)")]
    UnknownName(String),
}

/// Outcome of summing a possibly infinite sequence with a cutoff.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BoundedSum {
    Exact(Weight),
    /// `hi` is `None` when no bound on the remaining terms was supplied.
    Interval {
        lo: Weight,
        hi: Option<Weight>,
    },
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

impl Weight {
    pub fn rat(n: i64, d: i64) -> Weight {
        Weight::Rat(rat(n, d))
    }

    pub fn nat(n: u64) -> Weight {
        Weight::Nat(BigUint::from(n))
    }

    /// The rational value of a finite weight.
    pub fn to_rational(&self) -> Option<Rational> {
        match self {
            Weight::Bool(b) => Some(if *b { Rational::one() } else { Rational::zero() }),
            Weight::Rat(q) => Some(q.clone()),
            Weight::Nat(n) => Some(Rational::from_integer(BigInt::from(n.clone()))),
            Weight::Inf => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self.to_rational() {
            Some(q) => q.to_f64().unwrap_or(f64::NAN),
            None => f64::INFINITY,
        }
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Bool(b) => write!(f, "{}", u8::from(*b)),
            Weight::Rat(q) => write!(f, "{}", fmt_rational(q)),
            Weight::Nat(n) => write!(f, "{n}"),
            Weight::Inf => write!(f, "inf"),
        }
    }
}

pub fn fmt_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Parses `"3"`, `"-1/2"` or `"0.25"` into an exact rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches('-'), frac);
        let n: BigInt = digits.parse().ok()?;
        let d = num_traits::pow(BigInt::from(10), frac.len());
        let q = Rational::new(n, d);
        return Some(if neg { -q } else { q });
    }
    s.parse::<BigInt>().ok().map(Rational::from_integer)
}

impl Semiring {
    pub fn from_name(name: &str) -> Result<Semiring, SemiringError> {
        match name {
            "bool" => Ok(Semiring::Bool),
            "prob" => Ok(Semiring::Prob),
            "nat" => Ok(Semiring::Nat),
            "nat-inf" => Ok(Semiring::NatInf),
            other => Err(SemiringError::UnknownName(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Semiring::Bool => "bool",
            Semiring::Prob => "prob",
            Semiring::Nat => "nat",
            Semiring::NatInf => "nat-inf",
        }
    }

    pub fn zero(self) -> Weight {
        match self {
            Semiring::Bool => Weight::Bool(false),
            Semiring::Prob => Weight::Rat(Rational::zero()),
            Semiring::Nat | Semiring::NatInf => Weight::Nat(BigUint::zero()),
        }
    }

    pub fn one(self) -> Weight {
        match self {
            Semiring::Bool => Weight::Bool(true),
            Semiring::Prob => Weight::Rat(Rational::one()),
            Semiring::Nat | Semiring::NatInf => Weight::Nat(BigUint::one()),
        }
    }

    /// The greatest element, if the carrier has one.
    pub fn top(self) -> Option<Weight> {
        match self {
            Semiring::Bool => Some(Weight::Bool(true)),
            Semiring::Prob => Some(Weight::Rat(Rational::one())),
            Semiring::Nat => None,
            Semiring::NatInf => Some(Weight::Inf),
        }
    }

    pub fn scheme(self) -> Option<Scheme> {
        match self {
            Semiring::Bool | Semiring::NatInf => Some(Scheme::Indicative),
            Semiring::Prob => Some(Scheme::Conservative),
            Semiring::Nat => None,
        }
    }

    pub fn is_partial(self) -> bool {
        self == Semiring::Prob
    }

    pub fn is_zero(self, w: &Weight) -> bool {
        *w == self.zero()
    }

    pub fn contains(self, w: &Weight) -> bool {
        match (self, w) {
            (Semiring::Bool, Weight::Bool(_)) => true,
            (Semiring::Prob, Weight::Rat(q)) => !q.is_negative() && *q <= Rational::one(),
            (Semiring::Nat | Semiring::NatInf, Weight::Nat(_)) => true,
            (Semiring::NatInf, Weight::Inf) => true,
            _ => false,
        }
    }

    fn undefined(self, a: &Weight, b: &Weight) -> SemiringError {
        SemiringError::Undefined(a.clone(), b.clone(), self.name())
    }

    /// Semiring addition; `Undefined` when the sum leaves a partial carrier.
    pub fn add(self, a: &Weight, b: &Weight) -> Result<Weight, SemiringError> {
        match (a, b) {
            (Weight::Bool(x), Weight::Bool(y)) => Ok(Weight::Bool(*x || *y)),
            (Weight::Rat(x), Weight::Rat(y)) => {
                let s = x + y;
                if self.is_partial() && s > Rational::one() {
                    Err(self.undefined(a, b))
                } else {
                    Ok(Weight::Rat(s))
                }
            }
            (Weight::Nat(x), Weight::Nat(y)) => Ok(Weight::Nat(x + y)),
            (Weight::Inf, Weight::Nat(_) | Weight::Inf) | (Weight::Nat(_), Weight::Inf) => Ok(Weight::Inf),
            _ => Err(self.undefined(a, b)),
        }
    }

    /// Semiring multiplication. Total on every instance.
    pub fn mul(self, a: &Weight, b: &Weight) -> Weight {
        match (a, b) {
            (Weight::Bool(x), Weight::Bool(y)) => Weight::Bool(*x && *y),
            (Weight::Rat(x), Weight::Rat(y)) => Weight::Rat(x * y),
            (Weight::Nat(x), Weight::Nat(y)) => Weight::Nat(x * y),
            (Weight::Inf, Weight::Nat(n)) | (Weight::Nat(n), Weight::Inf) => {
                if n.is_zero() {
                    Weight::Nat(BigUint::zero())
                } else {
                    Weight::Inf
                }
            }
            (Weight::Inf, Weight::Inf) => Weight::Inf,
            _ => panic!("mul of {a} and {b} mixes carriers in {}", self.name()),
        }
    }

    /// `a <= b` iff `a + c = b` for some `c`, decided in closed form.
    pub fn natural_leq(self, a: &Weight, b: &Weight) -> bool {
        match (a, b) {
            (Weight::Bool(x), Weight::Bool(y)) => !*x || *y,
            (Weight::Rat(x), Weight::Rat(y)) => x <= y,
            (Weight::Nat(x), Weight::Nat(y)) => x <= y,
            (_, Weight::Inf) => true,
            (Weight::Inf, Weight::Nat(_)) => false,
            _ => false,
        }
    }

    /// Extends a total semiring without a strong infinity by one.
    pub fn adjoin_infinity(self) -> Result<Semiring, SemiringError> {
        match self {
            Semiring::Nat => Ok(Semiring::NatInf),
            Semiring::Prob => Err(SemiringError::Partial(self.name())),
            Semiring::Bool | Semiring::NatInf => Err(SemiringError::AlreadyInfinite(self.name())),
        }
    }

    /// Embeds a rational constant into the carrier.
    pub fn from_rational(self, q: &Rational) -> Result<Weight, SemiringError> {
        let bad = || SemiringError::NotInCarrier(fmt_rational(q), self.name());
        match self {
            Semiring::Bool => {
                if q.is_zero() {
                    Ok(Weight::Bool(false))
                } else if q.is_one() {
                    Ok(Weight::Bool(true))
                } else {
                    Err(bad())
                }
            }
            Semiring::Prob => {
                let w = Weight::Rat(q.clone());
                if self.contains(&w) {
                    Ok(w)
                } else {
                    Err(bad())
                }
            }
            Semiring::Nat | Semiring::NatInf => {
                if q.is_integer() && !q.is_negative() {
                    Ok(Weight::Nat(q.to_integer().to_biguint().ok_or_else(bad)?))
                } else {
                    Err(bad())
                }
            }
        }
    }

    /// Re-expresses a weight from any carrier in this one.
    pub fn coerce(self, w: &Weight) -> Result<Weight, SemiringError> {
        match w {
            Weight::Inf if self == Semiring::NatInf => Ok(Weight::Inf),
            Weight::Inf => match self.top() {
                Some(t) if self.scheme() == Some(Scheme::Indicative) => Ok(t),
                _ => Err(SemiringError::NotInCarrier("inf".into(), self.name())),
            },
            other => {
                if self.contains(other) {
                    return Ok(other.clone());
                }
                self.from_rational(&other.to_rational().expect("finite weight"))
            }
        }
    }

    /// Parses the serialized forms `"0"`, `"1"`, `"3/4"`, `"inf"`.
    pub fn parse_weight(self, s: &str) -> Result<Weight, SemiringError> {
        let t = s.trim();
        if t == "inf" {
            return self.coerce(&Weight::Inf);
        }
        let q = parse_rational(t).ok_or_else(|| SemiringError::NotInCarrier(t.to_string(), self.name()))?;
        self.from_rational(&q)
    }

    /// Left fold of `add` over a finite list.
    pub fn sum<'a>(self, ws: impl IntoIterator<Item = &'a Weight>) -> Result<Weight, SemiringError> {
        let mut acc = self.zero();
        for w in ws {
            acc = self.add(&acc, w)?;
        }
        Ok(acc)
    }

    /// Sums up to `cutoff` terms. `empty_from` witnesses that every term at
    /// or after that index is zero; `residual` bounds the sum of the terms
    /// beyond the cutoff.
    pub fn bounded_sum(
        self,
        terms: impl IntoIterator<Item = Weight>,
        cutoff: usize,
        empty_from: Option<usize>,
        residual: Option<&Weight>,
    ) -> Result<BoundedSum, SemiringError> {
        let mut acc = self.zero();
        let limit = empty_from.map_or(cutoff, |e| e.min(cutoff));
        for t in terms.into_iter().take(limit) {
            acc = self.add(&acc, &t)?;
            if self.absorbs(&acc) {
                return Ok(BoundedSum::Exact(acc));
            }
        }
        if empty_from.is_some_and(|e| e <= cutoff) {
            return Ok(BoundedSum::Exact(acc));
        }
        let hi = match residual {
            Some(r) => Some(self.add(&acc, r)?),
            None => None,
        };
        Ok(BoundedSum::Interval { lo: acc, hi })
    }

    /// True when `w + x = w` for every `x` that can still be added.
    fn absorbs(self, w: &Weight) -> bool {
        self.scheme() == Some(Scheme::Indicative) && Some(w) == self.top().as_ref()
    }

    /// Every element of a finite carrier, or a small sample for infinite ones.
    pub fn sample_elements(self) -> Vec<Weight> {
        match self {
            Semiring::Bool => vec![Weight::Bool(false), Weight::Bool(true)],
            Semiring::Prob => {
                [(0, 1), (1, 4), (1, 3), (1, 2), (2, 3), (1, 1)].iter().map(|&(n, d)| Weight::rat(n, d)).collect()
            }
            Semiring::Nat => (0..5).map(Weight::nat).collect(),
            Semiring::NatInf => (0..5).map(Weight::nat).chain([Weight::Inf]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boolean_addition_is_disjunction() {
        let b = Semiring::Bool;
        assert_eq!(b.add(&b.one(), &b.one()).unwrap(), b.one());
    }

    #[test]
    fn probabilities_above_one_are_undefined() {
        let p = Semiring::Prob;
        assert!(p.add(&Weight::rat(3, 5), &Weight::rat(3, 5)).is_err());
        assert_eq!(p.add(&Weight::rat(1, 4), &Weight::rat(1, 4)).unwrap(), Weight::rat(1, 2));
    }

    #[test]
    fn infinity_absorbs_except_against_zero() {
        let n = Semiring::NatInf;
        assert_eq!(n.mul(&Weight::Inf, &n.zero()), n.zero());
        assert_eq!(n.mul(&Weight::Inf, &Weight::nat(3)), Weight::Inf);
        assert_eq!(n.mul(&Weight::Inf, &Weight::Inf), Weight::Inf);
        assert_eq!(n.add(&Weight::Inf, &Weight::nat(5)).unwrap(), Weight::Inf);
        assert_eq!(n.mul(&Weight::nat(2), &Weight::nat(3)), Weight::nat(6));
    }

    #[test]
    fn natural_order_examples() {
        assert!(Semiring::Prob.natural_leq(&Weight::rat(1, 4), &Weight::rat(1, 2)));
        assert!(!Semiring::Bool.natural_leq(&Weight::Bool(true), &Weight::Bool(false)));
        assert!(Semiring::NatInf.natural_leq(&Weight::nat(7), &Weight::Inf));
    }

    #[test]
    fn natural_leq_matches_witness_search() {
        // a <= b iff some c in a small pool satisfies a + c = b; the pool
        // includes inf so absorption witnesses are found.
        let s = Semiring::NatInf;
        let pool: Vec<Weight> = (0..12).map(Weight::nat).chain([Weight::Inf]).collect();
        for a in &pool {
            for b in &pool {
                let witnessed = pool.iter().any(|c| s.add(a, c).ok().as_ref() == Some(b));
                assert_eq!(s.natural_leq(a, b), witnessed, "{a} <= {b}");
            }
        }
    }

    #[test]
    fn adjoin_infinity_yields_indicative() {
        let s = Semiring::Nat.adjoin_infinity().unwrap();
        assert_eq!(s.scheme(), Some(Scheme::Indicative));
        assert!(Semiring::NatInf.adjoin_infinity().is_err());
        assert!(Semiring::Bool.adjoin_infinity().is_err());
        assert!(Semiring::Prob.adjoin_infinity().is_err());
    }

    #[test]
    fn bounded_sum_cases() {
        let p = Semiring::Prob;
        let terms = vec![Weight::rat(1, 2), Weight::rat(1, 4), Weight::rat(1, 8), p.zero(), p.zero()];
        assert_eq!(p.bounded_sum(terms, 10, Some(3), None).unwrap(), BoundedSum::Exact(Weight::rat(7, 8)));

        let geo = (0..).map(|k: u32| Weight::Rat(Rational::new(1.into(), BigInt::from(2).pow(k + 1))));
        let res = Weight::Rat(Rational::new(1.into(), BigInt::from(1024)));
        let mut lo = Rational::zero();
        for k in 0..10u32 {
            lo += Rational::new(1.into(), BigInt::from(2).pow(k + 1));
        }
        assert_eq!(lo, rat(1023, 1024));
        assert_eq!(
            p.bounded_sum(geo, 10, None, Some(&res)).unwrap(),
            BoundedSum::Interval { lo: Weight::Rat(lo), hi: Some(Weight::rat(1, 1)) }
        );

        let b = Semiring::Bool;
        let ones = std::iter::repeat(b.one());
        assert_eq!(b.bounded_sum(ones, 100, None, None).unwrap(), BoundedSum::Exact(b.one()));
    }

    #[test]
    fn weights_serialize() {
        assert_eq!(Weight::rat(3, 4).to_string(), "3/4");
        assert_eq!(Weight::Bool(true).to_string(), "1");
        assert_eq!(Weight::Inf.to_string(), "inf");
        for s in [Semiring::Prob, Semiring::NatInf, Semiring::Bool] {
            for w in s.sample_elements() {
                assert_eq!(s.parse_weight(&w.to_string()).unwrap(), w);
            }
        }
    }
}
