//! Finite-support weightings over program states plus the divergence outcome.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::lang::State;
use crate::semiring::{Semiring, SemiringError, Weight};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    State(State),
    /// The divergence outcome `↯`.
    Div,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::State(s) => write!(f, "{s}"),
            Outcome::Div => write!(f, "DIV"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum WeightingError {
    #[error("mass overflow at {outcome}: {source}")]
    Overflow { outcome: String, source: SemiringError },
    #[error("weight for {0} is outside {1}")]
    NotInCarrier(String, &'static str),
    #[error("cannot parse weighting: {0}")]
    Parse(String),
}

/// A map from outcomes to nonzero weights. Absent keys weigh zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Weighting {
    sr: Semiring,
    entries: BTreeMap<Outcome, Weight>,
}

impl Weighting {
    pub fn empty(sr: Semiring) -> Weighting {
        Weighting { sr, entries: BTreeMap::new() }
    }

    pub fn unit(sr: Semiring, o: Outcome) -> Weighting {
        let mut m = Weighting::empty(sr);
        m.entries.insert(o, sr.one());
        m
    }

    pub fn unit_state(sr: Semiring, s: State) -> Weighting {
        Weighting::unit(sr, Outcome::State(s))
    }

    pub fn div(sr: Semiring, w: Weight) -> Weighting {
        Weighting::from_entries(sr, [(Outcome::Div, w)]).expect("single entry")
    }

    /// Builds a weighting, summing repeated outcomes.
    pub fn from_entries(
        sr: Semiring,
        entries: impl IntoIterator<Item = (Outcome, Weight)>,
    ) -> Result<Weighting, WeightingError> {
        let mut m = Weighting::empty(sr);
        for (o, w) in entries {
            if !sr.contains(&w) {
                return Err(WeightingError::NotInCarrier(o.to_string(), sr.name()));
            }
            m.add_at(o, &w)?;
        }
        Ok(m)
    }

    pub fn semiring(&self) -> Semiring {
        self.sr
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, o: &Outcome) -> Weight {
        self.entries.get(o).cloned().unwrap_or_else(|| self.sr.zero())
    }

    pub fn div_weight(&self) -> Weight {
        self.get(&Outcome::Div)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Outcome, &Weight)> {
        self.entries.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &Outcome> {
        self.entries.keys()
    }

    pub fn states(&self) -> impl Iterator<Item = (&State, &Weight)> {
        self.entries.iter().filter_map(|(o, w)| match o {
            Outcome::State(s) => Some((s, w)),
            Outcome::Div => None,
        })
    }

    pub fn has_div(&self) -> bool {
        self.entries.contains_key(&Outcome::Div)
    }

    /// The part of `self` on program states.
    pub fn without_div(&self) -> Weighting {
        let mut m = self.clone();
        m.entries.remove(&Outcome::Div);
        m
    }

    fn add_at(&mut self, o: Outcome, w: &Weight) -> Result<(), WeightingError> {
        if self.sr.is_zero(w) {
            return Ok(());
        }
        let cur = self.get(&o);
        let s = self.sr.add(&cur, w).map_err(|source| WeightingError::Overflow { outcome: o.to_string(), source })?;
        self.entries.insert(o, s);
        Ok(())
    }

    /// Sets the weight of one outcome, pruning zero.
    pub fn set(&mut self, o: Outcome, w: Weight) {
        if self.sr.is_zero(&w) {
            self.entries.remove(&o);
        } else {
            self.entries.insert(o, w);
        }
    }

    pub fn mass(&self) -> Result<Weight, WeightingError> {
        let mut acc = self.sr.zero();
        for (o, w) in &self.entries {
            acc = self.sr.add(&acc, w).map_err(|source| WeightingError::Overflow { outcome: o.to_string(), source })?;
        }
        Ok(acc)
    }

    /// Mass of the program-state part only.
    pub fn state_mass(&self) -> Result<Weight, WeightingError> {
        self.without_div().mass()
    }

    /// In-place `self + u·other`.
    pub fn add_scaled(&mut self, u: &Weight, other: &Weighting) -> Result<(), WeightingError> {
        for (o, w) in &other.entries {
            self.add_at(o.clone(), &self.sr.mul(u, w))?;
        }
        Ok(())
    }

    pub fn wsum(&self, other: &Weighting) -> Result<Weighting, WeightingError> {
        let mut m = self.clone();
        for (o, w) in &other.entries {
            m.add_at(o.clone(), w)?;
        }
        Ok(m)
    }

    pub fn scale_left(&self, u: &Weight) -> Weighting {
        self.map_weights(|w| self.sr.mul(u, w))
    }

    pub fn scale_right(&self, u: &Weight) -> Weighting {
        self.map_weights(|w| self.sr.mul(w, u))
    }

    fn map_weights(&self, f: impl Fn(&Weight) -> Weight) -> Weighting {
        let mut m = Weighting::empty(self.sr);
        for (o, w) in &self.entries {
            m.set(o.clone(), f(w));
        }
        m
    }

    /// `f†(m)`: pushes every state through `f` and carries divergence as is.
    pub fn kleisli_extend<E>(&self, mut f: impl FnMut(&State) -> Result<Weighting, E>) -> Result<Weighting, E>
    where
        E: From<WeightingError>,
    {
        let mut out = Weighting::empty(self.sr);
        for (o, w) in &self.entries {
            match o {
                Outcome::State(s) => out.add_scaled(w, &f(s)?)?,
                Outcome::Div => out.add_at(Outcome::Div, w)?,
            }
        }
        Ok(out)
    }

    /// Keeps the states satisfying `test`; divergence is dropped.
    pub fn project<E>(&self, mut test: impl FnMut(&State) -> Result<bool, E>) -> Result<Weighting, E> {
        let mut m = Weighting::empty(self.sr);
        for (s, w) in self.states() {
            if test(s)? {
                m.entries.insert(Outcome::State(s.clone()), w.clone());
            }
        }
        Ok(m)
    }

    /// The fusion order: state weights rise, divergence weight falls.
    pub fn fusion_leq(&self, other: &Weighting) -> bool {
        let sr = self.sr;
        let states_ok = self
            .entries
            .keys()
            .chain(other.entries.keys())
            .filter(|o| **o != Outcome::Div)
            .all(|o| sr.natural_leq(&self.get(o), &other.get(o)));
        states_ok && sr.natural_leq(&other.div_weight(), &self.div_weight())
    }

    /// Parses `{ (x=1,y=2): 1/2, DIV: 1/2 }`.
    pub fn parse(sr: Semiring, text: &str) -> Result<Weighting, WeightingError> {
        let err = |m: &str| WeightingError::Parse(format!("{m} in `{text}`"));
        let body =
            text.trim().strip_prefix('{').and_then(|t| t.strip_suffix('}')).ok_or_else(|| err("expected braces"))?;
        let mut entries = Vec::new();
        let mut rest = body.trim();
        while !rest.is_empty() {
            let (outcome, after) = if let Some(r) = rest.strip_prefix("DIV") {
                (Outcome::Div, r)
            } else {
                let r = rest.strip_prefix('(').ok_or_else(|| err("expected `(` or DIV"))?;
                let close = r.find(')').ok_or_else(|| err("unclosed state"))?;
                let state = State::parse_bindings(&r[..close]).map_err(|e| err(&e))?;
                (Outcome::State(state), &r[close + 1..])
            };
            let after = after.trim_start().strip_prefix(':').ok_or_else(|| err("expected `:`"))?;
            let end = after.find(',').unwrap_or(after.len());
            let wtext = after[..end].trim();
            let w = sr.parse_weight(wtext).map_err(|e| err(&e.to_string()))?;
            entries.push((outcome, w));
            rest = after[end..].trim_start().trim_start_matches(',').trim();
        }
        Weighting::from_entries(sr, entries)
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return write!(f, "{{}}");
        }
        let parts: Vec<String> = self.entries.iter().map(|(o, w)| format!("{o}: {w}")).collect();
        write!(f, "{{ {} }}", parts.join(", "))
    }
}
