use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use super::hull::{self, Hull};
use super::{eval_in, sat_add, Ctx, EvalConfig, EvalError, EvalResult, Frontier, Pending, Status};
use crate::lang::{eval_guard, nonneg_increment, Action, Command, Expr, Guard, LValue, State};
use crate::semiring::{Rational, Scheme, Semiring, Weight};
use crate::weighting::{Outcome, Weighting};

/// Mass still iterating after some number of unroll steps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Residual {
    Explicit(Weighting),
    /// A box summary, used once the explicit residual outgrows the budget.
    Summary(Hull),
}

impl Residual {
    pub fn mass(&self, sr: Semiring) -> Weight {
        match self {
            Residual::Explicit(m) => m.mass().unwrap_or_else(|_| sr.top().expect("bounded")),
            Residual::Summary(h) => h.mass.clone(),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Residual::Explicit(m) if m.is_empty())
    }

    pub fn explicit(&self) -> Option<&Weighting> {
        match self {
            Residual::Explicit(m) => Some(m),
            Residual::Summary(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopApprox {
    /// Number of completed unroll steps. After `n + 1` steps, `collected`
    /// holds the exit terms for iterations `0..=n` and the residual is the
    /// image of `(assume e1; C)^(n+1)`.
    pub steps: usize,
    /// Exits so far, plus divergence carried in or produced by the body.
    pub collected: Weighting,
    pub residual: Residual,
}

impl LoopApprox {
    /// `collected + ⊤·|residual|·unit(↯)`: the Kleene approximant `Φ^steps(⊥)`.
    pub fn reconstruct(&self) -> Result<Weighting, EvalError> {
        let sr = self.collected.semiring();
        let top = sr.top().ok_or_else(|| EvalError::Unsupported(format!("{} has no top element", sr.name())))?;
        let r = sr.mul(&top, &self.residual.mass(sr));
        Ok(self.collected.wsum(&Weighting::div(sr, r))?)
    }
}

/// Step-by-step loop unrolling on a weighting.
pub struct Unroller {
    ctx: Ctx,
    body: Command,
    e1: Guard,
    e2: Guard,
    approx: LoopApprox,
    history: VecDeque<(Weighting, Weighting)>,
    body_pending: Option<Weight>,
    inner_status: Status,
    outcome: Option<Status>,
    cache: HashMap<State, EvalResult>,
}

impl Unroller {
    pub fn new(body: &Command, e1: &Guard, e2: &Guard, m: &Weighting, cfg: &EvalConfig) -> Result<Unroller, EvalError> {
        Unroller::with_ctx(Ctx { sr: m.semiring(), cfg: cfg.clone(), trace: None }, body, e1, e2, m)
    }

    pub(crate) fn with_ctx(
        ctx: Ctx,
        body: &Command,
        e1: &Guard,
        e2: &Guard,
        m: &Weighting,
    ) -> Result<Unroller, EvalError> {
        let sr = ctx.sr;
        let approx = LoopApprox {
            steps: 0,
            collected: Weighting::div(sr, m.div_weight()),
            residual: Residual::Explicit(m.without_div()),
        };
        let mut u = Unroller {
            ctx,
            body: body.desugar()?,
            e1: e1.clone(),
            e2: e2.clone(),
            approx,
            history: VecDeque::new(),
            body_pending: None,
            inner_status: Status::Stabilized,
            outcome: None,
            cache: HashMap::new(),
        };
        if u.approx.residual.is_empty() {
            u.outcome = Some(Status::Stabilized);
        }
        u.remember();
        Ok(u)
    }

    pub fn approx(&self) -> &LoopApprox {
        &self.approx
    }

    /// Set once the loop stabilized, cycled, or the summary gave up.
    pub fn outcome(&self) -> Option<Status> {
        self.outcome
    }

    pub fn is_done(&self) -> bool {
        self.outcome.is_some()
    }

    fn remember(&mut self) {
        if let Residual::Explicit(r) = &self.approx.residual {
            self.history.push_back((r.clone(), self.approx.collected.clone()));
            while self.history.len() > self.ctx.cfg.window + 1 {
                self.history.pop_front();
            }
        }
    }

    /// Performs one unroll step unless the loop is already resolved.
    pub fn step(&mut self) -> Result<(), EvalError> {
        if self.is_done() {
            return Ok(());
        }
        self.force_step()
    }

    /// Performs one unroll step even after the loop resolved. Used to compare
    /// later approximants against the Kleene chain.
    pub fn force_step(&mut self) -> Result<(), EvalError> {
        let resolved = self.outcome;
        match self.approx.residual.clone() {
            Residual::Explicit(r) => self.step_explicit(&r)?,
            Residual::Summary(h) => match hull::step(&h, &self.body, &self.e1, &self.e2, self.ctx.sr) {
                Some(next) => {
                    self.approx.steps += 1;
                    self.approx.residual = match next {
                        Some(h) => Residual::Summary(h),
                        None => Residual::Explicit(Weighting::empty(self.ctx.sr)),
                    };
                }
                None => {
                    self.outcome = resolved.or(Some(Status::Cutoff(self.approx.steps)));
                    return Ok(());
                }
            },
        }
        if resolved.is_some() {
            return Ok(());
        }
        if self.approx.residual.is_empty() {
            self.outcome = Some(Status::Stabilized);
            return Ok(());
        }
        self.detect_cycle();
        self.remember();
        if let Residual::Explicit(r) = &self.approx.residual {
            if r.len() > self.ctx.cfg.state_budget && self.body_pending.is_none() {
                if let Some(h) = Hull::of(r) {
                    self.approx.residual = Residual::Summary(h);
                }
            }
        }
        Ok(())
    }

    fn step_explicit(&mut self, r: &Weighting) -> Result<(), EvalError> {
        let sr = self.ctx.sr;
        let mut exits = Weighting::empty(sr);
        let mut next = Weighting::empty(sr);
        for (s, w) in r.states() {
            let out = sr.mul(w, &eval_guard(sr, &self.e2, s)?);
            if !sr.is_zero(&out) {
                exits.set(Outcome::State(s.clone()), out);
            }
            let enter = sr.mul(w, &eval_guard(sr, &self.e1, s)?);
            if sr.is_zero(&enter) {
                continue;
            }
            if !self.cache.contains_key(s) {
                let res = eval_in(&self.ctx, &self.body, &Weighting::unit_state(sr, s.clone()))?;
                self.cache.insert(s.clone(), res);
            }
            let res = &self.cache[s];
            next.add_scaled(&enter, &res.known)?;
            self.inner_status = self.inner_status.join(res.status);
            if let Some(p) = &res.pending {
                let add = sr.mul(&enter, &p.mass);
                self.body_pending = Some(match &self.body_pending {
                    Some(q) => sat_add(sr, q, &add),
                    None => add,
                });
            }
        }
        let carried = Weighting::div(sr, next.div_weight());
        self.approx.collected = self.approx.collected.wsum(&exits)?.wsum(&carried)?;
        self.approx.residual = Residual::Explicit(next.without_div());
        self.approx.steps += 1;
        self.ctx.record(&next);
        Ok(())
    }

    fn detect_cycle(&mut self) {
        if self.body_pending.is_some() {
            return;
        }
        let Residual::Explicit(r) = &self.approx.residual else { return };
        let len = self.history.len();
        for p in 1..=self.ctx.cfg.window.min(len) {
            let (old_r, old_c) = &self.history[len - p];
            if old_r == r && *old_c == self.approx.collected {
                self.outcome = Some(Status::CycleDetected(p));
                return;
            }
        }
    }

    /// Steps until the loop resolves or the unroll limit is reached.
    pub fn run(&mut self) -> Result<(), EvalError> {
        while !self.is_done() && self.approx.steps < self.ctx.cfg.unroll_limit {
            self.step()?;
        }
        Ok(())
    }

    /// Summarizes the current approximation as an evaluation result.
    pub fn finish(&self) -> Result<EvalResult, EvalError> {
        let sr = self.ctx.sr;
        let status = self.outcome.unwrap_or(Status::Cutoff(self.approx.steps));
        let status = status.join(self.inner_status);
        let body_pending = self.body_pending.clone().map(|mass| Pending { mass, frontier: None });
        match self.outcome {
            Some(Status::Stabilized) => {
                Ok(EvalResult { known: self.approx.collected.clone(), pending: body_pending, status })
            }
            Some(Status::CycleDetected(p)) => {
                let top = sr.top().ok_or_else(|| {
                    EvalError::Unsupported(format!("a nonterminating loop has no weight in {}", sr.name()))
                })?;
                let len = self.history.len();
                let min_mass =
                    self.history
                        .iter()
                        .skip(len - p)
                        .map(|(r, _)| r.mass().unwrap_or_else(|_| top.clone()))
                        .min_by(|a, b| {
                            if sr.natural_leq(a, b) {
                                std::cmp::Ordering::Less
                            } else {
                                std::cmp::Ordering::Greater
                            }
                        })
                        .unwrap_or_else(|| sr.zero());
                let div = Weighting::div(sr, sr.mul(&top, &min_mass));
                Ok(EvalResult { known: self.approx.collected.wsum(&div)?, pending: body_pending, status })
            }
            _ => {
                let mass = self.approx.residual.mass(sr);
                let frontier = match &self.body_pending {
                    None => Some(self.frontier()),
                    Some(_) => None,
                };
                let mass = match &self.body_pending {
                    Some(q) => sat_add(sr, &mass, q),
                    None => mass,
                };
                let mass = match (sr.scheme(), sr.top()) {
                    (Some(Scheme::Conservative), Some(t)) if sr.natural_leq(&t, &mass) => t,
                    _ => mass,
                };
                let pending = (!sr.is_zero(&mass)).then_some(Pending { mass, frontier });
                Ok(EvalResult { known: self.approx.collected.clone(), pending, status })
            }
        }
    }

    /// Lower bounds on the non-decreasing variables over the residual.
    fn frontier(&self) -> Frontier {
        let mono = non_decreasing(&self.body);
        let mut mins: BTreeMap<String, Rational> = BTreeMap::new();
        match &self.approx.residual {
            Residual::Explicit(r) => {
                for (s, _) in r.states() {
                    for (v, x) in s.iter() {
                        if !mono(v) {
                            continue;
                        }
                        match mins.get(v) {
                            Some(m) if m <= x => {}
                            _ => {
                                mins.insert(v.clone(), x.clone());
                            }
                        }
                    }
                }
            }
            Residual::Summary(h) => {
                for v in h.bounds.keys().filter(|v| mono(v)) {
                    mins.insert(v.clone(), h.lower(v).expect("bound").clone());
                }
            }
        }
        Frontier(mins)
    }
}

fn array_cell_of(base: &str, v: &str) -> bool {
    v.strip_prefix(base).is_some_and(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
}

fn is_increment_of(v: &str, e: &Expr) -> bool {
    match e {
        Expr::Add(a, b) => {
            (matches!(&**a, Expr::Var(x) if x == v) && nonneg_increment(b))
                || (matches!(&**b, Expr::Var(x) if x == v) && nonneg_increment(a))
        }
        _ => false,
    }
}

fn keeps_nondecreasing(c: &Command, v: &str) -> bool {
    match c {
        Command::Skip | Command::Assume(_) => true,
        Command::Act(Action::Assign(LValue::Var(x), e)) => x != v || is_increment_of(v, e),
        Command::Act(Action::Assign(LValue::Index(a, _), _)) => !array_cell_of(a, v),
        Command::Act(Action::NondetFlag(lv)) => match lv {
            LValue::Var(x) => x != v,
            LValue::Index(a, _) => !array_cell_of(a, v),
        },
        Command::Seq(a, b) | Command::Choice(a, b) | Command::If(_, a, b) | Command::ProbChoice(_, a, b) => {
            keeps_nondecreasing(a, v) && keeps_nondecreasing(b, v)
        }
        Command::Iter(a, ..) | Command::While(_, a) => keeps_nondecreasing(a, v),
    }
}

/// Variables that the body can only increase.
fn non_decreasing(body: &Command) -> impl Fn(&str) -> bool + '_ {
    move |v| keeps_nondecreasing(body, v)
}

/// One application of the characteristic function:
/// `Φ(f)(σ) = ⟦e1⟧(σ)·f†(⟦C⟧(σ)) + ⟦e2⟧(σ)·unit(σ)`.
pub fn phi_step(
    f: &mut dyn FnMut(&State) -> Result<Weighting, EvalError>,
    s: &State,
    body: &Command,
    e1: &Guard,
    e2: &Guard,
    sr: Semiring,
    cfg: &EvalConfig,
) -> Result<Weighting, EvalError> {
    let enter = eval_guard(sr, e1, s)?;
    let exit = eval_guard(sr, e2, s)?;
    let mut out = Weighting::unit_state(sr, s.clone()).scale_left(&exit);
    if !sr.is_zero(&enter) {
        let image = super::eval_command(body, &Weighting::unit_state(sr, s.clone()), cfg)?;
        let image =
            image.exact_weighting().ok_or_else(|| EvalError::Unsupported("loop body has no exact semantics".into()))?;
        out = image.kleisli_extend(|t| f(t))?.scale_left(&enter).wsum(&out)?;
    }
    Ok(out)
}

/// The Kleene chain `Φ^n(⊥)(σ)` for `n = 0..=k`, with `⊥ = σ ↦ ⊤·unit(↯)`.
pub fn lfp_iterate(
    body: &Command,
    e1: &Guard,
    e2: &Guard,
    s: &State,
    k: usize,
    sr: Semiring,
    cfg: &EvalConfig,
) -> Result<Vec<Weighting>, EvalError> {
    let top = sr.top().ok_or_else(|| EvalError::Unsupported(format!("{} has no top element", sr.name())))?;
    let bottom = Weighting::div(sr, top);
    let body = body.desugar()?;
    // States reachable in j entered iterations, j = 0..k.
    let mut levels: Vec<BTreeSet<State>> = vec![BTreeSet::from([s.clone()])];
    let mut images: HashMap<State, Weighting> = HashMap::new();
    for _ in 0..k {
        let mut next = BTreeSet::new();
        for t in levels.last().expect("nonempty") {
            if sr.is_zero(&eval_guard(sr, e1, t)?) {
                continue;
            }
            if !images.contains_key(t) {
                let image = super::eval_command(&body, &Weighting::unit_state(sr, t.clone()), cfg)?;
                let image = image
                    .exact_weighting()
                    .cloned()
                    .ok_or_else(|| EvalError::Unsupported("loop body has no exact semantics".into()))?;
                images.insert(t.clone(), image);
            }
            next.extend(images[t].states().map(|(u, _)| u.clone()));
        }
        levels.push(next);
    }
    let mut chain = vec![bottom.clone()];
    // prev[t] = Φ^{n-1}(⊥)(t) for every t that level k-n+1 can reach.
    let mut prev: HashMap<State, Weighting> = HashMap::new();
    for n in 1..=k {
        let mut cur: HashMap<State, Weighting> = HashMap::new();
        let depth = k - n;
        let needed: BTreeSet<&State> = levels[..=depth].iter().flatten().collect();
        for t in needed {
            let enter = eval_guard(sr, e1, t)?;
            let exit = eval_guard(sr, e2, t)?;
            let mut out = Weighting::unit_state(sr, t.clone()).scale_left(&exit);
            if !sr.is_zero(&enter) {
                let image = &images[t];
                let bound = image.kleisli_extend(|u| -> Result<Weighting, EvalError> {
                    Ok(if n == 1 { bottom.clone() } else { prev[u].clone() })
                })?;
                out = bound.scale_left(&enter).wsum(&out)?;
            }
            cur.insert(t.clone(), out);
        }
        chain.push(cur[s].clone());
        prev = cur;
    }
    Ok(chain)
}
