//! Predicate transformers over finite domains and semantic triple checking.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assertions::{satisfies, Assertion, Scope, Truth};
use crate::lang::{eval_bool, BExpr, Command, State};
use crate::semantics::{eval_command, EvalConfig, EvalError, EvalResult};
use crate::semiring::{Semiring, Weight};
use crate::weighting::{Outcome, Weighting};

mod domain;
mod gen;

pub use domain::{DomainError, FiniteDomain, DEFAULT_DOMAIN_BOUND};
pub use gen::{random_command, random_predicate, GenConfig};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("postcondition `{0}`: {1}")]
    Predicate(String, String),
    #[error("precondition enumeration exceeded its budget: {0}")]
    GeneratorExhausted(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    /// `[C]Q`: every outcome in `Q` or divergent.
    Wlp,
    /// `⟨C⟩Q`: some terminating outcome in `Q`.
    Wpp,
    /// `[C]*Q`: every outcome in `Q`, none divergent.
    Wp,
    /// `⟨C⟩*Q`: some outcome in `Q` or divergent.
    Wlpp,
}

impl TransformKind {
    pub fn from_name(name: &str) -> Option<TransformKind> {
        Some(match name {
            "wlp" => TransformKind::Wlp,
            "wpp" => TransformKind::Wpp,
            "wp" => TransformKind::Wp,
            "wlpp" => TransformKind::Wlpp,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Wlp => "wlp",
            TransformKind::Wpp => "wpp",
            TransformKind::Wp => "wp",
            TransformKind::Wlpp => "wlpp",
        }
    }

    fn universal(self) -> bool {
        matches!(self, TransformKind::Wlp | TransformKind::Wp)
    }

    fn div_ok(self) -> bool {
        matches!(self, TransformKind::Wlp | TransformKind::Wlpp)
    }
}

/// States of the domain in the transformer, and states whose loops did not resolve.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StateSet {
    pub states: Vec<State>,
    pub unknown: Vec<State>,
}

impl StateSet {
    pub fn contains(&self, s: &State) -> bool {
        self.states.binary_search(s).is_ok()
    }

    pub fn is_subset(&self, other: &StateSet) -> bool {
        self.states.iter().all(|s| other.contains(s))
    }
}

fn in_post(o: &Outcome, q: &BExpr, kind: TransformKind) -> Result<bool, TransformError> {
    match o {
        Outcome::Div => Ok(kind.div_ok()),
        Outcome::State(s) => eval_bool(q, s).map_err(|e| TransformError::Predicate(q.to_string(), e.to_string())),
    }
}

/// Classifies one start state: `Some(b)` when decided.
fn classify(r: &EvalResult, q: &BExpr, kind: TransformKind) -> Result<Option<bool>, TransformError> {
    let mut hits = Vec::new();
    for o in r.known.support() {
        hits.push(in_post(o, q, kind)?);
    }
    let decided = if kind.universal() { hits.iter().all(|h| *h) } else { hits.iter().any(|h| *h) };
    if r.is_exact() {
        return Ok(Some(decided));
    }
    // Known outcomes are certain; pending mass may land anywhere.
    Ok(match (kind.universal(), decided) {
        (true, false) => Some(false),
        (false, true) => Some(true),
        _ => None,
    })
}

/// Evaluates the transformer pointwise over the Boolean semiring.
pub fn transform(
    kind: TransformKind,
    c: &Command,
    q: &BExpr,
    d: &FiniteDomain,
    cfg: &EvalConfig,
) -> Result<StateSet, TransformError> {
    let mut out = StateSet::default();
    for s in d.states() {
        let r = eval_command(c, &Weighting::unit_state(Semiring::Bool, s.clone()), cfg)?;
        match classify(&r, q, kind)? {
            Some(true) => out.states.push(s),
            Some(false) => {}
            None => out.unknown.push(s),
        }
    }
    Ok(out)
}

pub fn wlp_box(c: &Command, q: &BExpr, d: &FiniteDomain, cfg: &EvalConfig) -> Result<StateSet, TransformError> {
    transform(TransformKind::Wlp, c, q, d, cfg)
}

pub fn wpp_diamond(c: &Command, q: &BExpr, d: &FiniteDomain, cfg: &EvalConfig) -> Result<StateSet, TransformError> {
    transform(TransformKind::Wpp, c, q, d, cfg)
}

pub fn wp_total(c: &Command, q: &BExpr, d: &FiniteDomain, cfg: &EvalConfig) -> Result<StateSet, TransformError> {
    transform(TransformKind::Wp, c, q, d, cfg)
}

pub fn wlpp(c: &Command, q: &BExpr, d: &FiniteDomain, cfg: &EvalConfig) -> Result<StateSet, TransformError> {
    transform(TransformKind::Wlpp, c, q, d, cfg)
}

/// Where preconditions come from.
#[derive(Clone, Debug)]
pub enum Generator {
    /// Weightings over the states of a finite domain.
    Domain(FiniteDomain),
    /// An explicit list, filtered by the precondition.
    List(Vec<Weighting>),
}

#[derive(Clone, Debug)]
pub struct TripleConfig {
    pub eval: EvalConfig,
    /// Enumerate every Boolean weighting over the domain, not only those the
    /// precondition's shape calls for.
    pub full_enumeration: bool,
    /// Upper bound on generated preconditions.
    pub budget: usize,
}

impl Default for TripleConfig {
    fn default() -> Self {
        TripleConfig { eval: EvalConfig::default(), full_enumeration: false, budget: 1 << 14 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Valid {
        checked: usize,
        summary: String,
    },
    /// `pre` satisfies the precondition; `post` is its image, which violates the postcondition.
    Invalid {
        pre: Weighting,
        post: EvalResult,
        reason: String,
    },
    Unknown {
        checked: usize,
        reason: String,
    },
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid { .. })
    }

    pub fn is_invalid(&self) -> bool {
        matches!(self, Verdict::Invalid { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Valid { .. } => "valid",
            Verdict::Invalid { .. } => "invalid",
            Verdict::Unknown { .. } => "unknown",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Valid { checked, summary } => write!(f, "valid ({checked} preconditions; {summary})"),
            Verdict::Invalid { pre, post, reason } => write!(f, "invalid: {pre} |-> {post} ({reason})"),
            Verdict::Unknown { checked, reason } => write!(f, "unknown after {checked} preconditions: {reason}"),
        }
    }
}

/// The state predicate `P` when the assertion is `P^(1)`.
pub fn state_predicate(phi: &Assertion) -> Option<&BExpr> {
    match phi {
        Assertion::Atom(p, u) if *u == crate::assertions::WExpr::one() => Some(p),
        _ => None,
    }
}

fn subsets(outcomes: &[Outcome], sr: Semiring, budget: usize) -> Option<Vec<Weighting>> {
    if outcomes.len() >= usize::BITS as usize - 1 || (1usize << outcomes.len()) > budget {
        return None;
    }
    Some(
        (0usize..1 << outcomes.len())
            .map(|mask| {
                let es = outcomes
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, o)| (o.clone(), sr.one()));
                Weighting::from_entries(sr, es).expect("unit weights")
            })
            .collect(),
    )
}

/// Candidate preconditions and a description of how they were chosen.
fn candidates(
    phi: &Assertion,
    gen: &Generator,
    sr: Semiring,
    cfg: &TripleConfig,
) -> Result<(Vec<Weighting>, String), TransformError> {
    let d = match gen {
        Generator::List(ms) => return Ok((ms.clone(), format!("{} listed weightings", ms.len()))),
        Generator::Domain(d) => d,
    };
    let states = d.states();
    let mut all: Vec<Outcome> = states.iter().cloned().map(Outcome::State).collect();
    all.push(Outcome::Div);
    if sr == Semiring::Bool && cfg.full_enumeration {
        return subsets(&all, sr, cfg.budget)
            .map(|ms| (ms, "every Boolean weighting over the domain".to_string()))
            .ok_or_else(|| TransformError::GeneratorExhausted(format!("2^{} weightings", all.len())));
    }
    let units = || {
        let mut ms = vec![Weighting::empty(sr)];
        ms.extend(all.iter().map(|o| Weighting::unit(sr, o.clone())));
        ms
    };
    if sr == Semiring::Bool {
        if let Some(p) = state_predicate(phi) {
            let inside: Vec<Outcome> =
                states.iter().filter(|s| eval_bool(p, s).unwrap_or(false)).cloned().map(Outcome::State).collect();
            if let Some(ms) = subsets(&inside, sr, cfg.budget) {
                return Ok((ms, "every nonempty support inside the precondition".into()));
            }
            return Ok((units(), "unit weightings".into()));
        }
        if let Some(ms) = subsets(&all, sr, cfg.budget) {
            return Ok((ms, "every Boolean weighting over the domain".into()));
        }
    }
    Ok((units(), "unit weightings".into()))
}

/// Decides `⊨ ⟨φ⟩ C ⟨ψ⟩` over the generated preconditions.
pub fn check_triple(
    phi: &Assertion,
    c: &Command,
    psi: &Assertion,
    gen: &Generator,
    sr: Semiring,
    cfg: &TripleConfig,
) -> Result<Verdict, TransformError> {
    let mut scope = Scope::new(sr);
    if let Generator::Domain(d) = gen {
        scope = scope.with_domain(d.clone());
    }
    let (ms, how) = candidates(phi, gen, sr, cfg)?;
    let mut checked = 0;
    let mut undecided: Option<String> = None;
    for m in ms {
        match satisfies(&m, phi, &scope) {
            Truth::No => continue,
            Truth::Unknown(r) => {
                undecided.get_or_insert(format!("precondition on {m}: {r}"));
                continue;
            }
            Truth::Yes => {}
        }
        checked += 1;
        let r = eval_command(c, &m, &cfg.eval)?;
        match post_truth(&r, psi, &scope) {
            Truth::Yes => {}
            Truth::No => {
                let reason = format!("image does not satisfy {psi}");
                return Ok(Verdict::Invalid { pre: m, post: r, reason });
            }
            Truth::Unknown(reason) => {
                undecided.get_or_insert(format!("image of {m}: {reason}"));
            }
        }
    }
    Ok(match undecided {
        Some(reason) => Verdict::Unknown { checked, reason },
        None => Verdict::Valid { checked, summary: how },
    })
}

/// Satisfaction of the postcondition by a possibly inexact image.
fn post_truth(r: &EvalResult, psi: &Assertion, scope: &Scope) -> Truth {
    match r.exact_weighting() {
        Some(m) => satisfies(m, psi, scope),
        None if *psi == Assertion::Top => Truth::Yes,
        None => Truth::Unknown(format!("evaluation did not settle ({})", r.status)),
    }
}

/// The correspondence being tested between triples and transformers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// `⟨P⟩C⟨□Q⟩` iff `P ⊆ [C]Q`.
    Hoare,
    /// `⟨P⟩C⟨◇Q⟩` iff `P ⊆ ⟨C⟩Q`.
    Lisbon,
    /// `⟨P⟩C⟨□ᵀQ⟩` iff `P ⊆ [C]*Q`.
    TotalHoare,
}

impl Theorem {
    pub const ALL: [Theorem; 3] = [Theorem::Hoare, Theorem::Lisbon, Theorem::TotalHoare];

    fn parts(self, q: &BExpr) -> (Assertion, TransformKind) {
        match self {
            Theorem::Hoare => (Assertion::Box(q.clone()), TransformKind::Wlp),
            Theorem::Lisbon => (Assertion::Dia(q.clone()), TransformKind::Wpp),
            Theorem::TotalHoare => (Assertion::BoxT(q.clone()), TransformKind::Wp),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleReport {
    pub theorem: Theorem,
    pub triple: Verdict,
    /// Whether `P` lies inside the transformer, `None` when some state was unresolved.
    pub inclusion: Option<bool>,
}

impl OracleReport {
    /// `None` when either side is undecided.
    pub fn agrees(&self) -> Option<bool> {
        let triple = match &self.triple {
            Verdict::Valid { .. } => true,
            Verdict::Invalid { .. } => false,
            Verdict::Unknown { .. } => return None,
        };
        self.inclusion.map(|i| i == triple)
    }
}

/// Computes both sides of a subsumption theorem independently.
pub fn subsumption_oracle(
    theorem: Theorem,
    c: &Command,
    p: &BExpr,
    q: &BExpr,
    d: &FiniteDomain,
    cfg: &TripleConfig,
) -> Result<OracleReport, TransformError> {
    let (post, kind) = theorem.parts(q);
    let pre = Assertion::atom(p.clone());
    let triple = check_triple(&pre, c, &post, &Generator::Domain(d.clone()), Semiring::Bool, cfg)?;
    let set = transform(kind, c, q, d, &cfg.eval)?;
    let mut inclusion = Some(true);
    for s in d.states() {
        if !eval_bool(p, &s).map_err(|e| TransformError::Predicate(p.to_string(), e.to_string()))? {
            continue;
        }
        if set.unknown.contains(&s) {
            inclusion = None;
        } else if !set.contains(&s) {
            inclusion = Some(false);
            break;
        }
    }
    Ok(OracleReport { theorem, triple, inclusion })
}

/// Boolean weightings as sets of outcomes, and back.
pub fn as_outcome_set(m: &Weighting) -> Vec<Outcome> {
    m.iter().filter(|(_, w)| **w == Weight::Bool(true)).map(|(o, _)| o.clone()).collect()
}

pub fn from_outcome_set(outcomes: &[Outcome]) -> Weighting {
    Weighting::from_entries(Semiring::Bool, outcomes.iter().map(|o| (o.clone(), Weight::Bool(true))))
        .expect("Boolean weights")
}
