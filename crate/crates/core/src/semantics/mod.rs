//! Evaluation of commands on weightings.
//!
//! Loop-free commands are evaluated exactly. Loops are unrolled; a loop's
//! result is exact when its residual empties or cycles, and otherwise the
//! undetermined mass is reported as an upper bound on every outcome it could
//! still reach.

mod hull;
mod unroll;

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{eval_expr, eval_guard, Action, Command, Guard, LValue, LangError, State};
use crate::semiring::{fmt_rational, Rational, Scheme, Semiring, Weight};
use crate::weighting::{Outcome, Weighting, WeightingError};

pub use hull::Hull;
pub use unroll::{lfp_iterate, phi_step, LoopApprox, Residual, Unroller};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalConfig {
    /// Maximum number of unroll steps per loop entry.
    pub unroll_limit: usize,
    /// How many earlier residuals are compared when looking for a cycle.
    pub window: usize,
    /// Only used when printing approximate numbers.
    pub report_tolerance: Rational,
    /// Residuals with more states than this are summarized by a box.
    pub state_budget: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { unroll_limit: 64, window: 4, report_tolerance: Rational::default(), state_budget: 4096 }
    }
}

impl EvalConfig {
    pub fn new(unroll_limit: usize, window: usize) -> Result<EvalConfig, EvalError> {
        if unroll_limit == 0 || window == 0 {
            return Err(EvalError::BadConfig("unroll limit and window must be at least 1".into()));
        }
        Ok(EvalConfig { unroll_limit, window, ..EvalConfig::default() })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Lang(#[from] LangError),
    /// A sum left the carrier; the message names the outcome.
    #[error("{0}")]
    MassOverflow(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("bad configuration: {0}")]
    BadConfig(String),
}

impl From<WeightingError> for EvalError {
    fn from(e: WeightingError) -> Self {
        EvalError::MassOverflow(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "n", rename_all = "snake_case")]
pub enum Status {
    Stabilized,
    CycleDetected(usize),
    Cutoff(usize),
}

impl Status {
    fn rank(self) -> u8 {
        match self {
            Status::Stabilized => 0,
            Status::CycleDetected(_) => 1,
            Status::Cutoff(_) => 2,
        }
    }

    /// The less conclusive of two statuses.
    pub fn join(self, other: Status) -> Status {
        if other.rank() > self.rank() {
            other
        } else {
            self
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Stabilized => write!(f, "stabilized"),
            Status::CycleDetected(p) => write!(f, "cycle({p})"),
            Status::Cutoff(n) => write!(f, "cutoff({n})"),
        }
    }
}

/// A reported weight: exact, or bracketed. `None` as upper end means unbounded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Exact(Weight),
    Interval(Weight, Option<Weight>),
}

impl Value {
    pub fn lo(&self) -> &Weight {
        match self {
            Value::Exact(w) | Value::Interval(w, _) => w,
        }
    }

    pub fn hi(&self) -> Option<&Weight> {
        match self {
            Value::Exact(w) => Some(w),
            Value::Interval(_, h) => h.as_ref(),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Value::Exact(_))
    }

    /// Whether `w` lies in the bracket.
    pub fn contains(&self, sr: Semiring, w: &Weight) -> bool {
        sr.natural_leq(self.lo(), w) && self.hi().is_none_or(|h| sr.natural_leq(w, h))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Exact(w) => write!(f, "{w}"),
            Value::Interval(lo, Some(hi)) => write!(f, "[{lo}, {hi}]"),
            Value::Interval(lo, None) => write!(f, "[{lo}, inf)"),
        }
    }
}

/// Lower bounds on variables that every state receiving pending mass meets.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Frontier(pub BTreeMap<String, Rational>);

impl Frontier {
    pub fn excludes(&self, s: &State) -> bool {
        self.0.iter().any(|(v, lo)| s.get(v).is_some_and(|x| x < lo))
    }

    fn meet(&self, other: &Frontier) -> Frontier {
        Frontier(self.0.iter().filter_map(|(v, a)| other.0.get(v).map(|b| (v.clone(), a.min(b).clone()))).collect())
    }
}

/// Mass whose final outcome the evaluation did not determine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pending {
    pub mass: Weight,
    pub frontier: Option<Frontier>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalResult {
    /// Exact weights where no mass is pending, lower bounds otherwise.
    pub known: Weighting,
    pub pending: Option<Pending>,
    pub status: Status,
}

/// `a + b`, saturating at the top of a bounded carrier.
pub(crate) fn sat_add(sr: Semiring, a: &Weight, b: &Weight) -> Weight {
    match sr.add(a, b) {
        Ok(w) => match sr.top() {
            Some(t) if sr.natural_leq(&t, &w) => t,
            _ => w,
        },
        Err(_) => sr.top().expect("only bounded carriers overflow"),
    }
}

fn join_pending(sr: Semiring, a: Option<Pending>, b: Option<Pending>, keep_a_frontier: bool) -> Option<Pending> {
    match (a, b) {
        (None, None) => None,
        (Some(p), None) => Some(Pending { frontier: p.frontier.filter(|_| keep_a_frontier), ..p }),
        (None, Some(q)) => Some(q),
        (Some(p), Some(q)) => {
            let frontier = match (p.frontier.filter(|_| keep_a_frontier), q.frontier) {
                (Some(f), Some(g)) => Some(f.meet(&g)),
                _ => None,
            };
            Some(Pending { mass: sat_add(sr, &p.mass, &q.mass), frontier })
        }
    }
}

impl EvalResult {
    pub fn exact(m: Weighting) -> EvalResult {
        EvalResult { known: m, pending: None, status: Status::Stabilized }
    }

    pub fn semiring(&self) -> Semiring {
        self.known.semiring()
    }

    pub fn is_exact(&self) -> bool {
        self.pending.is_none()
    }

    pub fn exact_weighting(&self) -> Option<&Weighting> {
        self.is_exact().then_some(&self.known)
    }

    pub fn value(&self, o: &Outcome) -> Value {
        let sr = self.semiring();
        let known = self.known.get(o);
        let Some(p) = &self.pending else { return Value::Exact(known) };
        if let (Outcome::State(s), Some(f)) = (o, &p.frontier) {
            if f.excludes(s) {
                return Value::Exact(known);
            }
        }
        match sr.scheme() {
            Some(Scheme::Conservative) => {
                let hi = sat_add(sr, &known, &p.mass);
                if hi == known {
                    Value::Exact(known)
                } else {
                    Value::Interval(known, Some(hi))
                }
            }
            Some(Scheme::Indicative) => {
                let top = sr.top().expect("indicative carriers are bounded");
                if known == top {
                    Value::Exact(top)
                } else {
                    Value::Interval(known, Some(top))
                }
            }
            None => Value::Interval(known, None),
        }
    }

    /// Every outcome with a nonzero lower bound, plus divergence when mass
    /// is pending.
    pub fn entries(&self) -> Vec<(Outcome, Value)> {
        let mut outs: BTreeSet<Outcome> = self.known.support().cloned().collect();
        if self.pending.is_some() {
            outs.insert(Outcome::Div);
        }
        outs.into_iter()
            .map(|o| {
                let v = self.value(&o);
                (o, v)
            })
            .collect()
    }

    /// The bracket for states not listed in `entries`, when it is not zero.
    pub fn others(&self) -> Option<Value> {
        let p = self.pending.as_ref()?;
        let sr = self.semiring();
        let hi = match sr.scheme() {
            Some(Scheme::Conservative) => Some(p.mass.clone()),
            Some(Scheme::Indicative) => sr.top(),
            None => None,
        };
        Some(Value::Interval(sr.zero(), hi))
    }

    pub fn report(&self) -> Report {
        Report {
            semiring: self.semiring().name().to_string(),
            status: self.status,
            entries: self
                .entries()
                .into_iter()
                .map(|(o, v)| ReportEntry { outcome: o.to_string(), value: v.into() })
                .collect(),
            others: self.others().map(Into::into),
        }
    }
}

impl fmt::Display for EvalResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.entries().iter().map(|(o, v)| format!("{o}: {v}")).collect();
        if parts.is_empty() {
            write!(f, "{{}}")?;
        } else {
            write!(f, "{{ {} }}", parts.join(", "))?;
        }
        if let Some(o) = self.others() {
            write!(f, "\nothers: {o}")?;
        }
        write!(f, "\nstatus: {}", self.status)
    }
}

/// A serializable rendering of an evaluation result.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub semiring: String,
    pub status: Status,
    pub entries: Vec<ReportEntry>,
    pub others: Option<ReportValue>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub outcome: String,
    pub value: ReportValue,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportValue {
    pub lo: String,
    pub hi: Option<String>,
    pub exact: bool,
}

impl From<Value> for ReportValue {
    fn from(v: Value) -> Self {
        ReportValue { lo: v.lo().to_string(), hi: v.hi().map(ToString::to_string), exact: v.is_exact() }
    }
}

/// Shared evaluation context: configuration and an optional state trace.
#[derive(Clone)]
pub(crate) struct Ctx {
    pub sr: Semiring,
    pub cfg: EvalConfig,
    pub trace: Option<Rc<RefCell<BTreeSet<State>>>>,
}

impl Ctx {
    fn record(&self, m: &Weighting) {
        if let Some(t) = &self.trace {
            let mut t = t.borrow_mut();
            for (s, _) in m.states() {
                if !t.contains(s) {
                    t.insert(s.clone());
                }
            }
        }
    }
}

fn lvalue_name(lv: &LValue, s: &State) -> Result<String, LangError> {
    let name = match lv {
        LValue::Var(v) => v.clone(),
        LValue::Index(a, i) => crate::lang::index_name(a, i, s)?,
    };
    if s.get(&name).is_none() {
        return Err(LangError::UnboundVariable(name));
    }
    Ok(name)
}

/// The image of one state under an atomic action.
pub fn eval_action(sr: Semiring, a: &Action, s: &State) -> Result<Weighting, EvalError> {
    match a {
        Action::Assign(lv, e) => {
            let name = lvalue_name(lv, s)?;
            Ok(Weighting::unit_state(sr, s.with(&name, eval_expr(e, s)?)))
        }
        Action::NondetFlag(lv) => {
            if sr != Semiring::Bool {
                return Err(EvalError::Unsupported(format!(
                    "`nondet_flag` needs the bool semiring, not {}",
                    sr.name()
                )));
            }
            let name = lvalue_name(lv, s)?;
            let zero = Weighting::unit_state(sr, s.with(&name, Rational::from_integer(0.into())));
            let one = Weighting::unit_state(sr, s.with(&name, Rational::from_integer(1.into())));
            Ok(zero.wsum(&one)?)
        }
    }
}

fn scale_states(m: &Weighting, mut f: impl FnMut(&State) -> Result<Weight, EvalError>) -> Result<Weighting, EvalError> {
    let sr = m.semiring();
    let mut out = Weighting::empty(sr);
    for (o, w) in m.iter() {
        match o {
            Outcome::State(s) => out.set(o.clone(), sr.mul(w, &f(s)?)),
            Outcome::Div => out.set(Outcome::Div, w.clone()),
        }
    }
    Ok(out)
}

/// Commands that only drop mass by boolean tests keep a frontier valid.
fn keeps_frontier(c: &Command) -> bool {
    match c {
        Command::Skip | Command::Assume(Guard::Bool(_)) => true,
        Command::Seq(a, b) => keeps_frontier(a) && keeps_frontier(b),
        _ => false,
    }
}

pub(crate) fn eval_in(ctx: &Ctx, c: &Command, m: &Weighting) -> Result<EvalResult, EvalError> {
    ctx.record(m);
    let sr = ctx.sr;
    match c {
        Command::Skip => Ok(EvalResult::exact(m.clone())),
        Command::Assume(g) => Ok(EvalResult::exact(scale_states(m, |s| Ok(eval_guard(sr, g, s)?))?)),
        Command::Act(a) => Ok(EvalResult::exact(m.kleisli_extend(|s| eval_action(sr, a, s))?)),
        Command::Seq(c1, c2) => {
            let a = eval_in(ctx, c1, m)?;
            let b = eval_in(ctx, c2, &a.known)?;
            let keep = keeps_frontier(c2);
            Ok(EvalResult {
                known: b.known,
                pending: join_pending(sr, a.pending, b.pending, keep),
                status: a.status.join(b.status),
            })
        }
        Command::Choice(c1, c2) => {
            let states = m.without_div();
            let a = eval_in(ctx, c1, &states)?;
            let b = eval_in(ctx, c2, &states)?;
            Ok(EvalResult {
                known: a.known.wsum(&b.known)?.wsum(&Weighting::div(sr, m.div_weight()))?,
                pending: join_pending(sr, a.pending, b.pending, true),
                status: a.status.join(b.status),
            })
        }
        Command::Iter(body, e1, e2) => {
            let mut u = Unroller::with_ctx(ctx.clone(), body, e1, e2, m)?;
            u.run()?;
            u.finish()
        }
        Command::If(..) | Command::While(..) | Command::ProbChoice(..) => eval_in(ctx, &c.desugar()?, m),
    }
}

fn ctx_for(m: &Weighting, cfg: &EvalConfig) -> Ctx {
    Ctx { sr: m.semiring(), cfg: cfg.clone(), trace: None }
}

/// `⟦C⟧†(m)`. Sugar is expanded on the fly.
pub fn eval_command(c: &Command, m: &Weighting, cfg: &EvalConfig) -> Result<EvalResult, EvalError> {
    eval_in(&ctx_for(m, cfg), c, m)
}

/// Like `eval_command`, also returning every state the evaluation visited.
pub fn eval_traced(c: &Command, m: &Weighting, cfg: &EvalConfig) -> Result<(EvalResult, BTreeSet<State>), EvalError> {
    let trace = Rc::new(RefCell::new(BTreeSet::new()));
    let ctx = Ctx { trace: Some(trace.clone()), ..ctx_for(m, cfg) };
    let r = eval_in(&ctx, c, m)?;
    ctx.record(&r.known);
    drop(ctx);
    let states = Rc::try_unwrap(trace).map(RefCell::into_inner).unwrap_or_else(|rc| rc.borrow().clone());
    Ok((r, states))
}

pub fn unroll_loop(
    body: &Command,
    e1: &Guard,
    e2: &Guard,
    m: &Weighting,
    cfg: &EvalConfig,
) -> Result<EvalResult, EvalError> {
    eval_command(&Command::Iter(Box::new(body.clone()), e1.clone(), e2.clone()), m, cfg)
}

/// The image of each precondition weighting.
pub fn spost(c: &Command, pre: &[Weighting], cfg: &EvalConfig) -> Result<Vec<EvalResult>, EvalError> {
    pre.iter().map(|m| eval_command(c, m, cfg)).collect()
}

/// Warnings for bare weight-scaling `assume` in a mass-conserving semiring.
pub fn lint(c: &Command, sr: Semiring) -> Vec<String> {
    let mut out = Vec::new();
    if sr.scheme() == Some(Scheme::Conservative) {
        lint_walk(c, &mut out);
    }
    out
}

fn lint_walk(c: &Command, out: &mut Vec<String>) {
    match c {
        Command::Assume(Guard::Const(Weight::Rat(q)))
            if *q != Rational::from_integer(0.into()) && *q != Rational::from_integer(1.into()) =>
        {
            out.push(format!("`assume {}` scales total mass; use `+[p]` for probabilistic choice", fmt_rational(q)));
        }
        Command::Seq(a, b) | Command::Choice(a, b) | Command::If(_, a, b) | Command::ProbChoice(_, a, b) => {
            lint_walk(a, out);
            lint_walk(b, out);
        }
        Command::Iter(a, ..) | Command::While(_, a) => lint_walk(a, out),
        _ => {}
    }
}

#[cfg(test)]
mod tests;
