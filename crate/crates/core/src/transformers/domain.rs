use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::lang::State;
use crate::semiring::{fmt_rational, parse_rational, rat_int, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("domain has {size} states, more than the bound {bound}")]
    TooLarge { size: u128, bound: usize },
    #[error("cannot parse domain: {0}")]
    Parse(String),
}

/// Explicit value sets per variable; the state space is their product.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteDomain {
    vars: Vec<(String, Vec<Rational>)>,
    bound: usize,
}

pub const DEFAULT_DOMAIN_BOUND: usize = 100_000;

fn int_range(text: &str) -> Option<Vec<Rational>> {
    let (lo, hi) = text.split_once("..")?;
    let lo: i64 = lo.trim().parse().ok()?;
    let hi: i64 = hi.trim().parse().ok()?;
    (lo <= hi && hi - lo < 1_000_000).then(|| (lo..=hi).map(rat_int).collect())
}

fn split_top(text: &str) -> Vec<&str> {
    let (mut depth, mut start, mut out) = (0i32, 0usize, Vec::new());
    for (i, c) in text.char_indices() {
        match c {
            '{' | '[' => depth += 1,
            '}' | ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&text[start..]);
    out
}

impl FiniteDomain {
    pub fn new(vars: Vec<(String, Vec<Rational>)>) -> Result<FiniteDomain, DomainError> {
        FiniteDomain { vars, bound: DEFAULT_DOMAIN_BOUND }.checked()
    }

    pub fn with_bound(mut self, bound: usize) -> Result<FiniteDomain, DomainError> {
        self.bound = bound;
        self.checked()
    }

    fn checked(self) -> Result<FiniteDomain, DomainError> {
        let size = self.size();
        if size > self.bound as u128 {
            return Err(DomainError::TooLarge { size, bound: self.bound });
        }
        Ok(self)
    }

    /// Parses `x:0..3, y:{0,2,5}, A[0..2]:0..3`. Ranges are inclusive; `A[0..2]` declares `A0`, `A1`, `A2`.
    pub fn parse(text: &str) -> Result<FiniteDomain, DomainError> {
        let err = |m: &str| DomainError::Parse(format!("{m} in `{text}`"));
        let mut vars: Vec<(String, Vec<Rational>)> = Vec::new();
        for part in split_top(text).into_iter().map(str::trim).filter(|p| !p.is_empty()) {
            let (name, vals) = part.split_once(':').ok_or_else(|| err("expected `name:values`"))?;
            let vals = vals.trim();
            let values: Vec<Rational> = if let Some(inner) = vals.strip_prefix('{').and_then(|v| v.strip_suffix('}')) {
                inner
                    .split(',')
                    .map(|v| parse_rational(v.trim()).ok_or_else(|| err("bad value")))
                    .collect::<Result<_, _>>()?
            } else {
                int_range(vals).ok_or_else(|| err("bad range"))?
            };
            let values: Vec<Rational> = values.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
            let name = name.trim();
            let names: Vec<String> = match name.split_once('[') {
                Some((base, idx)) => {
                    let idx = idx.strip_suffix(']').ok_or_else(|| err("unclosed `[`"))?;
                    let ids = int_range(idx).ok_or_else(|| err("bad index range"))?;
                    ids.iter().map(|i| format!("{base}{}", fmt_rational(i))).collect()
                }
                None => vec![name.to_string()],
            };
            for n in names {
                if n.is_empty() || vars.iter().any(|(v, _)| *v == n) {
                    return Err(err("empty or repeated variable"));
                }
                vars.push((n, values.clone()));
            }
        }
        FiniteDomain::new(vars)
    }

    pub fn size(&self) -> u128 {
        self.vars.iter().fold(1u128, |acc, (_, vs)| acc.saturating_mul(vs.len() as u128))
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.vars.iter().map(|(v, _)| v.as_str())
    }

    pub fn values(&self, var: &str) -> Option<&[Rational]> {
        self.vars.iter().find(|(v, _)| v == var).map(|(_, vs)| vs.as_slice())
    }

    pub fn covers<'a>(&self, names: impl IntoIterator<Item = &'a String>) -> bool {
        names.into_iter().all(|n| self.values(n).is_some())
    }

    pub fn contains(&self, s: &State) -> bool {
        self.vars.iter().all(|(v, vs)| s.get(v).is_some_and(|x| vs.contains(x)))
    }

    /// Every state of the product, in lexicographic order.
    pub fn states(&self) -> Vec<State> {
        let mut out = vec![State::new()];
        for (v, vs) in &self.vars {
            let mut next = Vec::with_capacity(out.len() * vs.len());
            for s in &out {
                for x in vs {
                    next.push(s.with(v, x.clone()));
                }
            }
            out = next;
        }
        out.sort();
        out
    }
}

impl fmt::Display for FiniteDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .vars
            .iter()
            .map(|(v, vs)| format!("{v}:{{{}}}", vs.iter().map(fmt_rational).collect::<Vec<_>>().join(",")))
            .collect();
        write!(f, "{}", parts.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ranges_sets_and_arrays() {
        let d = FiniteDomain::parse("x:0..3, y:{0,2}, A[0..1]:1..2").unwrap();
        assert_eq!(d.size(), 4 * 2 * 2 * 2);
        assert_eq!(d.vars().collect::<Vec<_>>(), ["x", "y", "A0", "A1"]);
        assert_eq!(d.states().len(), 32);
        let again = FiniteDomain::parse(&d.to_string()).unwrap();
        assert_eq!(again.states(), d.states());
    }

    #[test]
    fn rejects_oversized() {
        let err = FiniteDomain::parse("a:0..99, b:0..99, c:0..99").unwrap_err();
        assert!(matches!(err, DomainError::TooLarge { size: 1_000_000, .. }));
    }
}
