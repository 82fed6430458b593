//! Per-rule checking of derivation nodes.

use std::collections::BTreeSet;

use num_traits::ToPrimitive;

use super::{
    child_path, display_path, CheckConfig, CheckReport, NodeReport, NodeVerdict, Obligation, Proof, ProofNode,
    ReasonClass, Rejection, Rule,
};
use crate::assertions::{
    entails_guard_value, implies, is_nonterminating, limit_of_family, oplus, pred_implies, sample_models,
    witness_states, Assertion, ExpSum, LimitKind, LimitVerdict, Schema, Scope, Truth, WExpr,
};
use crate::lang::{eval_expr, parse_expr, BExpr, CmpOp, Command, Expr, Guard};
use crate::semiring::Semiring;
use crate::transformers::{check_triple, Generator, Verdict};

/// A value for a logical variable bound by an enclosing rule.
#[derive(Clone, Debug)]
enum Val {
    Int(i64),
    Weight(WExpr),
}

/// One joint assignment of a binder group.
type Inst = Vec<(String, Val)>;

fn apply(a: &Assertion, inst: &[(String, Val)]) -> Assertion {
    inst.iter().fold(a.clone(), |acc, (v, val)| match val {
        Val::Int(n) => acc.instantiate(v, *n),
        Val::Weight(w) => acc.subst_weight(v, w),
    })
}

fn apply_weight(u: &WExpr, inst: &[(String, Val)]) -> WExpr {
    inst.iter().fold(u.clone(), |acc, (v, val)| match val {
        Val::Int(n) => acc.subst(v, &Expr::num(*n)),
        Val::Weight(w) if acc == WExpr::Var(v.clone()) => w.clone(),
        Val::Weight(_) => acc,
    })
}

type Step = Result<(), Rejection>;

fn reject(class: ReasonClass, detail: impl Into<String>) -> Rejection {
    Rejection { class, detail: detail.into() }
}

fn shape(ok: bool, detail: impl FnOnce() -> String) -> Step {
    if ok {
        Ok(())
    } else {
        Err(reject(ReasonClass::ShapeMismatch, detail()))
    }
}

struct Checker<'a> {
    proof: &'a Proof,
    cfg: &'a CheckConfig,
    scope: Scope,
}

/// Mutable state while checking one node.
struct NodeCtx<'a> {
    node: &'a ProofNode,
    path: &'a str,
    binders: &'a [Vec<Inst>],
    obligations: Vec<Obligation>,
}

impl NodeCtx<'_> {
    fn oblige(&mut self, claim: impl Into<String>, checked_up_to: Option<u64>) {
        self.obligations.push(Obligation {
            node: self.path.to_string(),
            rule: self.node.rule,
            claim: claim.into(),
            checked_up_to,
        });
    }

    /// Every joint instantiation of the enclosing binders.
    fn instances(&self, cap: usize) -> Vec<Inst> {
        let mut acc: Vec<Inst> = vec![Vec::new()];
        for group in self.binders {
            let mut next = Vec::new();
            'outer: for a in &acc {
                for g in group {
                    if next.len() >= cap {
                        break 'outer;
                    }
                    let mut x = a.clone();
                    x.extend(g.iter().cloned());
                    next.push(x);
                }
            }
            acc = next;
        }
        acc
    }
}

fn flatten_seq(c: &Command, out: &mut Vec<Command>) {
    match c {
        Command::Seq(a, b) => {
            flatten_seq(a, out);
            flatten_seq(b, out);
        }
        other => out.push(other.clone()),
    }
}

fn seq_list(c: &Command) -> Vec<Command> {
    let mut out = Vec::new();
    flatten_seq(&desugared(c), &mut out);
    out
}

fn desugared(c: &Command) -> Command {
    c.desugar().unwrap_or_else(|_| c.clone())
}

/// Program equality up to sugar.
pub(crate) fn same_prog(a: &Command, b: &Command) -> bool {
    a == b || desugared(a) == desugared(b)
}

fn closed(u: &WExpr) -> Option<crate::semiring::Rational> {
    match u {
        WExpr::Num(e) => eval_expr(e, &Default::default()).ok(),
        _ => None,
    }
}

fn free_of_weight(u: &WExpr) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    if let WExpr::Num(e) = u {
        e.free_vars(&mut out);
    }
    out
}

/// Weights equal syntactically, by value, or as exponential sums of their index.
pub(crate) fn same_weight(u: &WExpr, v: &WExpr) -> bool {
    if u == v {
        return true;
    }
    if let (Some(a), Some(b)) = (closed(u), closed(v)) {
        return a == b;
    }
    let mut fv = free_of_weight(u);
    fv.extend(free_of_weight(v));
    if fv.len() == 1 {
        let n = fv.iter().next().expect("one variable");
        if let (Some(a), Some(b)) = (ExpSum::from_weight(u, n), ExpSum::from_weight(v, n)) {
            return a == b;
        }
    }
    false
}

impl Checker<'_> {
    fn same_pred(&self, p: &BExpr, q: &BExpr) -> bool {
        if p == q {
            return true;
        }
        let (a, b) = (p.conjuncts(), q.conjuncts());
        if a.iter().all(|c| b.contains(c)) && b.iter().all(|c| a.contains(c)) {
            return true;
        }
        pred_implies(p, q, &self.scope) == Some(true) && pred_implies(q, p, &self.scope) == Some(true)
    }

    /// Assertion equality modulo normalization, ⊕ reordering and predicate equivalence.
    fn congruent(&self, a: &Assertion, b: &Assertion) -> bool {
        let (a, b) = (a.normalize(), b.normalize());
        self.congruent_norm(&a, &b) || a.definitional().normalize() == b.definitional().normalize()
    }

    fn congruent_norm(&self, a: &Assertion, b: &Assertion) -> bool {
        use Assertion as A;
        if a == b {
            return true;
        }
        match (a, b) {
            (A::Atom(p, u), A::Atom(q, v)) => same_weight(u, v) && self.same_pred(p, q),
            (A::Div(u), A::Div(v)) => same_weight(u, v),
            (A::OPlus(_), _) | (_, A::OPlus(_)) => {
                let (xs, ys) = (a.summands(), b.summands());
                if xs.len() != ys.len() {
                    return false;
                }
                let mut used = vec![false; ys.len()];
                xs.iter().all(|x| {
                    let hit = ys.iter().enumerate().find(|(i, y)| !used[*i] && self.congruent_norm(x, y));
                    hit.map(|(i, _)| used[i] = true).is_some()
                })
            }
            (A::ScaleL(u, x), A::ScaleL(v, y)) | (A::ScaleR(x, u), A::ScaleR(y, v)) => {
                same_weight(u, v) && self.congruent_norm(x, y)
            }
            (A::And(x1, y1), A::And(x2, y2)) | (A::Or(x1, y1), A::Or(x2, y2)) => {
                (self.congruent_norm(x1, x2) && self.congruent_norm(y1, y2))
                    || (self.congruent_norm(x1, y2) && self.congruent_norm(y1, x2))
            }
            (A::Box(p), A::Box(q)) | (A::Dia(p), A::Dia(q)) | (A::BoxT(p), A::BoxT(q)) | (A::DiaP(p), A::DiaP(q)) => {
                self.same_pred(p, q)
            }
            (A::SuppIn(p, d), A::SuppIn(q, e)) | (A::SuppMeets(p, d), A::SuppMeets(q, e)) => {
                d == e && self.same_pred(p, q)
            }
            (A::OPlusAll(k, lo, x), A::OPlusAll(j, lo2, y)) if lo == lo2 => {
                self.congruent_norm(x, &y.subst(j, &Expr::var(k)))
            }
            (A::ExistsFin(k, lo, hi, x), A::ExistsFin(j, lo2, hi2, y)) if lo == lo2 && hi == hi2 => {
                self.congruent_norm(x, &y.subst(j, &Expr::var(k)))
            }
            (A::ExistsNat(k, x), A::ExistsNat(j, y)) => self.congruent_norm(x, &y.subst(j, &Expr::var(k))),
            (
                A::ExistsWeight { vars: v1, nonzero: n1, body: x },
                A::ExistsWeight { vars: v2, nonzero: n2, body: y },
            ) => v1 == v2 && n1 == n2 && self.congruent_norm(x, y),
            _ => false,
        }
    }

    fn expect_congruent(&self, a: &Assertion, b: &Assertion, what: &str) -> Step {
        shape(self.congruent(a, b), || format!("{what}: `{a}` does not match `{b}`"))
    }

    /// States satisfying or violating the predicates of `a`, for refuting implications.
    fn pool_for(&self, assertions: &[&Assertion]) -> Vec<crate::lang::State> {
        let mut preds = Vec::new();
        for a in assertions {
            collect_preds(a, &mut preds);
        }
        let mut out = Vec::new();
        for p in preds {
            for q in [p.clone(), BExpr::not(p)] {
                for s in witness_states(&q, &self.scope, &self.proof.vars, 3) {
                    if !out.contains(&s) {
                        out.push(s);
                    }
                }
            }
        }
        out
    }

    fn implication(&self, a: &Assertion, b: &Assertion) -> Truth {
        let mut scope = self.scope.clone();
        if scope.domain.is_none() {
            scope.pool = self.pool_for(&[a, b]);
        }
        implies(a, b, &scope)
    }

    /// Semantic validity of one closed triple: `Ok(None)` valid, `Ok(Some(_))`
    /// undecided, `Err(_)` refuted.
    fn triple_once(&self, pre: &Assertion, c: &Command, post: &Assertion) -> Result<Option<String>, String> {
        let (pre, post) = (pre.normalize(), post.normalize());
        if pre == Assertion::Bot || post == Assertion::Top {
            return Ok(None);
        }
        let sr = self.proof.semiring;
        let gen = match &self.proof.domain {
            Some(d) if sr == Semiring::Bool => Generator::Domain(d.clone()),
            _ => {
                let ms = sample_models(&pre, &self.scope, &self.proof.vars, self.cfg.sample_cap);
                if ms.is_empty() {
                    return Ok(Some(format!("no weightings satisfying `{pre}` were found")));
                }
                Generator::List(ms)
            }
        };
        match check_triple(&pre, c, &post, &gen, sr, &self.cfg.triple) {
            Ok(Verdict::Valid { .. }) => Ok(None),
            Ok(Verdict::Invalid { pre: m, reason, .. }) => Err(format!("{reason} from {m}")),
            Ok(Verdict::Unknown { reason, .. }) => Ok(Some(reason)),
            Err(e) => Ok(Some(e.to_string())),
        }
    }

    /// Checks `⟨pre⟩ c ⟨post⟩` for every binder instance.
    fn triple(&self, cx: &NodeCtx, pre: &Assertion, c: &Command, post: &Assertion) -> Result<Option<String>, String> {
        let mut pending = None;
        for inst in cx.instances(self.cfg.instance_cap) {
            let (p, q) = (apply(pre, &inst), apply(post, &inst));
            match self.triple_once(&p, c, &q) {
                Ok(None) => {}
                Ok(Some(r)) => {
                    pending.get_or_insert(format!("⟨{p}⟩ {c} ⟨{q}⟩: {r}"));
                }
                Err(r) => return Err(format!("⟨{p}⟩ {c} ⟨{q}⟩ is invalid: {r}")),
            }
        }
        Ok(pending)
    }

    /// A semantic premise: refutation rejects with `class`, undecided becomes an obligation.
    fn premise(
        &self,
        cx: &mut NodeCtx,
        pre: &Assertion,
        c: &Command,
        post: &Assertion,
        class: ReasonClass,
        bound: Option<u64>,
    ) -> Step {
        match self.triple(cx, pre, c, post) {
            Ok(None) => Ok(()),
            Ok(Some(r)) => {
                cx.oblige(r, bound);
                Ok(())
            }
            Err(r) => Err(reject(class, r)),
        }
    }

    /// A side condition evaluated per binder instance.
    fn side(&self, cx: &mut NodeCtx, claim: &str, mut f: impl FnMut(&[(String, Val)]) -> Truth) -> Step {
        let mut pending = None;
        for inst in cx.instances(self.cfg.instance_cap) {
            match f(&inst) {
                Truth::Yes => {}
                Truth::No => return Err(reject(ReasonClass::SideConditionFailed, format!("{claim} fails"))),
                Truth::Unknown(r) => {
                    pending.get_or_insert(format!("{claim}: {r}"));
                }
            }
        }
        if let Some(r) = pending {
            cx.oblige(r, None);
        }
        Ok(())
    }

    fn entails(&self, phi: &Assertion, b: &BExpr) -> Truth {
        entails_guard_value(phi, &Guard::Bool(b.clone()), &self.proof.semiring.one(), &self.scope)
    }

    fn nonterminating(&self, zeta: &Assertion) -> Truth {
        let z = zeta.normalize();
        if z.is_nothing() || is_nonterminating(&z) {
            return Truth::Yes;
        }
        let sr = self.proof.semiring;
        let terminating_atom = z.summands().iter().any(|a| match a {
            Assertion::Atom(p, u) => *p != BExpr::False && u.eval(sr).is_ok_and(|w| !sr.is_zero(&w)),
            _ => false,
        });
        if terminating_atom {
            return Truth::No;
        }
        self.implication(&z, &Assertion::AlwaysDiv)
    }
}

fn collect_preds(a: &Assertion, out: &mut Vec<BExpr>) {
    use Assertion as A;
    match a {
        A::Atom(p, _) | A::Box(p) | A::Dia(p) | A::BoxT(p) | A::DiaP(p) | A::SuppIn(p, _) | A::SuppMeets(p, _) => {
            if !out.contains(p) && *p != BExpr::True && *p != BExpr::False {
                out.push(p.clone());
            }
        }
        A::Not(x) | A::ScaleL(_, x) | A::ScaleR(x, _) | A::OPlusAll(_, _, x) | A::ExistsNat(_, x) => {
            collect_preds(x, out)
        }
        A::ExistsFin(_, _, _, x) | A::ExistsWeight { body: x, .. } => collect_preds(x, out),
        A::And(x, y) | A::Or(x, y) | A::Implies(x, y) => {
            collect_preds(x, out);
            collect_preds(y, out);
        }
        A::OPlus(xs) => xs.iter().for_each(|x| collect_preds(x, out)),
        _ => {}
    }
}

fn state_pred(a: &Assertion) -> Option<&BExpr> {
    match a {
        Assertion::Atom(p, u) if closed(u).is_some_and(|q| q == num_traits::One::one()) => Some(p),
        _ => None,
    }
}

fn conj(a: &BExpr, b: &BExpr) -> BExpr {
    BExpr::and(a.clone(), b.clone())
}

fn not(b: &BExpr) -> BExpr {
    BExpr::not(b.clone())
}

/// Combines families pointwise with ⊕, renaming indices to the first one's.
pub(crate) fn combine(fams: &[&Schema]) -> Schema {
    let index = fams[0].index.clone();
    let rename = |s: &Schema, a: &Assertion| {
        if s.index == index {
            a.clone()
        } else {
            a.subst(&s.index, &Expr::var(&index))
        }
    };
    let keys: BTreeSet<u64> = fams.iter().flat_map(|s| s.cases.keys().copied()).collect();
    let cases = keys.iter().map(|k| (*k, oplus(fams.iter().map(|s| s.instantiate(*k))))).collect();
    let default = oplus(fams.iter().map(|s| rename(s, &s.default)));
    Schema { index, cases, default, limit: None }
}

fn nothing_family(index: &str) -> Schema {
    Schema::uniform(index, Assertion::nothing())
}

/// The i-th premise or a shape error.
fn premise_at(node: &ProofNode, i: usize) -> Result<&ProofNode, Rejection> {
    node.premises.get(i).ok_or_else(|| reject(ReasonClass::ShapeMismatch, format!("missing premise {i}")))
}

fn arity(node: &ProofNode, n: usize) -> Step {
    shape(node.premises.len() == n, || format!("{} takes {n} premise(s), found {}", node.rule, node.premises.len()))
}

fn same_prog_step(parent: &Command, child: &Command) -> Step {
    shape(same_prog(parent, child), || format!("premise program `{child}` differs from `{parent}`"))
}

impl Checker<'_> {
    /// The binders a premise is checked under.
    fn child_binders(&self, node: &ProofNode, binders: &[Vec<Inst>]) -> Vec<Vec<Inst>> {
        let mut out = binders.to_vec();
        let n = self.cfg.ncheck as i64;
        match (node.rule, &node.pre) {
            (Rule::Exists, Assertion::ExistsFin(k, lo, hi, _)) => {
                out.push((*lo..*hi).map(|i| vec![(k.clone(), Val::Int(i))]).collect());
            }
            (Rule::Exists, Assertion::ExistsNat(k, _)) => {
                out.push((0..=n).map(|i| vec![(k.clone(), Val::Int(i))]).collect());
            }
            (Rule::Exists, Assertion::ExistsWeight { vars, nonzero, .. }) => {
                let sr = self.proof.semiring;
                let mut combos: Vec<Inst> = vec![Vec::new()];
                for v in vars {
                    combos = combos
                        .iter()
                        .flat_map(|c| {
                            sr.sample_elements().into_iter().filter_map(move |w| {
                                let q = w.to_rational()?;
                                let mut c = c.clone();
                                c.push((v.clone(), Val::Weight(WExpr::Num(Expr::Num(q)))));
                                Some(c)
                            })
                        })
                        .collect();
                }
                if *nonzero {
                    combos.retain(|c| {
                        c.iter().any(
                            |(_, v)| !matches!(v, Val::Weight(w) if closed(w).is_some_and(|q| q == Default::default())),
                        )
                    });
                }
                out.push(combos);
            }
            (Rule::HoareVariant, _) => {
                if let Some(vals) = self.variant_values(node) {
                    let idx = node.params.get("index").cloned().unwrap_or_else(|| "n".into());
                    out.push(vals.into_iter().map(|i| vec![(idx.clone(), Val::Int(i))]).collect());
                }
            }
            _ => {}
        }
        out
    }

    /// Values of the variant on states satisfying the invariant and guard.
    fn variant_values(&self, node: &ProofNode) -> Option<Vec<i64>> {
        let r = parse_expr(node.params.get("variant")?).ok()?;
        let Command::While(b, _) = &node.prog else { return None };
        let p = state_pred(&node.pre)?;
        let Some(d) = &self.proof.domain else {
            return Some((0..=self.cfg.ncheck as i64).collect());
        };
        let guard = conj(p, b);
        let mut vals: BTreeSet<i64> = BTreeSet::new();
        for s in d.states() {
            if crate::lang::eval_bool(&guard, &s) == Ok(true) {
                if let Some(v) = eval_expr(&r, &s).ok().and_then(|q| q.to_integer().to_i64()) {
                    vals.insert(v);
                }
            }
        }
        Some(vals.into_iter().collect())
    }

    fn check_own(&self, cx: &mut NodeCtx) -> Step {
        let node = cx.node;
        let (pre, prog, post) = (&node.pre, &node.prog, &node.post);
        let one = || WExpr::one();
        match node.rule {
            Rule::False => {
                arity(node, 0)?;
                shape(pre.normalize() == Assertion::Bot, || format!("precondition `{pre}` is not BOT"))
            }
            Rule::True => {
                arity(node, 0)?;
                shape(post.normalize() == Assertion::Top, || format!("postcondition `{post}` is not TOP"))
            }
            Rule::Div => {
                arity(node, 0)?;
                match (pre.normalize(), post.normalize()) {
                    (Assertion::Div(u), Assertion::Div(v)) => {
                        shape(same_weight(&u, &v), || format!("weights {u} and {v} differ"))
                    }
                    _ => Err(reject(ReasonClass::ShapeMismatch, "pre and post must both be DIV^(u)")),
                }
            }
            Rule::Scale => {
                arity(node, 1)?;
                let p = premise_at(node, 0)?;
                same_prog_step(prog, &p.prog)?;
                match (pre, post) {
                    (Assertion::ScaleL(u, x), Assertion::ScaleL(v, y))
                    | (Assertion::ScaleR(x, u), Assertion::ScaleR(y, v)) => {
                        shape(same_weight(u, v), || format!("scale weights {u} and {v} differ"))?;
                        self.expect_congruent(x, &p.pre, "scaled precondition")?;
                        self.expect_congruent(y, &p.post, "scaled postcondition")
                    }
                    _ => Err(reject(ReasonClass::ShapeMismatch, "pre and post must be scaled by the same weight")),
                }
            }
            Rule::Disj | Rule::Conj => {
                arity(node, 2)?;
                let (p0, p1) = (premise_at(node, 0)?, premise_at(node, 1)?);
                same_prog_step(prog, &p0.prog)?;
                same_prog_step(prog, &p1.prog)?;
                let parts = |a: &Assertion| match (node.rule, a) {
                    (Rule::Disj, Assertion::Or(x, y)) | (Rule::Conj, Assertion::And(x, y)) => {
                        Some(((**x).clone(), (**y).clone()))
                    }
                    _ => None,
                };
                let ((a1, a2), (b1, b2)) = parts(pre)
                    .zip(parts(post))
                    .ok_or_else(|| reject(ReasonClass::ShapeMismatch, "pre and post must use the rule's connective"))?;
                self.expect_congruent(&a1, &p0.pre, "left precondition")?;
                self.expect_congruent(&a2, &p1.pre, "right precondition")?;
                self.expect_congruent(&b1, &p0.post, "left postcondition")?;
                self.expect_congruent(&b2, &p1.post, "right postcondition")
            }
            Rule::Choice => {
                shape(!node.premises.is_empty(), || "Choice needs premises".into())?;
                for p in &node.premises {
                    same_prog_step(prog, &p.prog)?;
                }
                self.expect_congruent(pre, &oplus(node.premises.iter().map(|p| p.pre.clone())), "precondition")?;
                self.expect_congruent(post, &oplus(node.premises.iter().map(|p| p.post.clone())), "postcondition")
            }
            Rule::Exists => {
                arity(node, 1)?;
                let p = premise_at(node, 0)?;
                same_prog_step(prog, &p.prog)?;
                use Assertion as A;
                let (x, y) = match (pre, post) {
                    (A::ExistsFin(k, lo, hi, x), A::ExistsFin(j, lo2, hi2, y)) if k == j && lo == lo2 && hi == hi2 => {
                        (x, y)
                    }
                    (A::ExistsNat(k, x), A::ExistsNat(j, y)) if k == j => {
                        cx.oblige(
                            format!("premise instantiated for {k} <= {}", self.cfg.ncheck),
                            Some(self.cfg.ncheck),
                        );
                        (x, y)
                    }
                    (
                        A::ExistsWeight { vars: v1, nonzero: n1, body: x },
                        A::ExistsWeight { vars: v2, nonzero: n2, body: y },
                    ) if v1 == v2 && n1 == n2 => (x, y),
                    _ => return Err(reject(ReasonClass::ShapeMismatch, "pre and post must bind the same variable")),
                };
                self.expect_congruent(x, &p.pre, "quantified precondition")?;
                self.expect_congruent(y, &p.post, "quantified postcondition")
            }
            Rule::Consequence => {
                arity(node, 1)?;
                let p = premise_at(node, 0)?;
                same_prog_step(prog, &p.prog)?;
                self.side(cx, &format!("`{pre}` => `{}`", p.pre), |i| {
                    self.implication(&apply(pre, i), &apply(&p.pre, i))
                })?;
                self.side(cx, &format!("`{}` => `{post}`", p.post), |i| {
                    self.implication(&apply(&p.post, i), &apply(post, i))
                })
            }
            Rule::Skip => {
                arity(node, 0)?;
                shape(*prog == Command::Skip, || format!("program `{prog}` is not skip"))?;
                self.expect_congruent(pre, post, "skip")
            }
            Rule::Seq | Rule::SeqTotalHoare | Rule::SeqLisbon => {
                arity(node, 2)?;
                let (p0, p1) = (premise_at(node, 0)?, premise_at(node, 1)?);
                let mut joined = seq_list(&p0.prog);
                joined.extend(seq_list(&p1.prog));
                shape(seq_list(prog) == joined, || format!("`{prog}` is not `{}; {}`", p0.prog, p1.prog))?;
                if node.rule != Rule::Seq {
                    let modal = |a: &Assertion| match (node.rule, a) {
                        (Rule::SeqTotalHoare, Assertion::BoxT(q)) | (Rule::SeqLisbon, Assertion::Dia(q)) => {
                            Some(q.clone())
                        }
                        _ => None,
                    };
                    let q = modal(&p0.post).ok_or_else(|| {
                        reject(ReasonClass::ShapeMismatch, "first premise must end in the rule's modality")
                    })?;
                    shape(modal(post).is_some() && state_pred(pre).is_some(), || {
                        "conclusion must be ⟨P⟩ C ⟨mod R⟩".into()
                    })?;
                    self.expect_congruent(&p0.pre, pre, "first precondition")?;
                    self.expect_congruent(&p1.pre, &Assertion::atom(q), "second precondition")?;
                    return self.expect_congruent(&p1.post, post, "postcondition");
                }
                self.expect_congruent(pre, &p0.pre, "precondition")?;
                self.expect_congruent(&p0.post, &p1.pre, "midcondition")?;
                self.expect_congruent(&p1.post, post, "postcondition")
            }
            Rule::Plus => {
                arity(node, 2)?;
                let (p0, p1) = (premise_at(node, 0)?, premise_at(node, 1)?);
                let Command::Choice(c1, c2) = prog else {
                    return Err(reject(ReasonClass::ShapeMismatch, format!("`{prog}` is not a choice")));
                };
                same_prog_step(c1, &p0.prog)?;
                same_prog_step(c2, &p1.prog)?;
                let sr = self.proof.semiring;
                self.side(cx, &format!("`{pre}` entails tru"), |i| {
                    entails_guard_value(&apply(pre, i), &Guard::Bool(BExpr::True), &sr.one(), &self.scope)
                })?;
                self.expect_congruent(&p0.pre, pre, "left precondition")?;
                self.expect_congruent(&p1.pre, pre, "right precondition")?;
                self.expect_congruent(post, &oplus([p0.post.clone(), p1.post.clone()]), "postcondition")
            }
            Rule::Assume => {
                arity(node, 0)?;
                let Command::Assume(e) = prog else {
                    return Err(reject(ReasonClass::ShapeMismatch, format!("`{prog}` is not an assume")));
                };
                let u = match post {
                    Assertion::ScaleR(x, u) | Assertion::ScaleL(u, x) if self.congruent(x, pre) => u.clone(),
                    _ if self.congruent(post, pre) => one(),
                    _ => {
                        return Err(reject(
                            ReasonClass::ShapeMismatch,
                            format!("postcondition `{post}` is not `{pre}` scaled"),
                        ))
                    }
                };
                let sr = self.proof.semiring;
                self.side(cx, &format!("`{pre}` entails {e} = {u}"), |i| match apply_weight(&u, i).eval(sr) {
                    Ok(w) => entails_guard_value(&apply(pre, i), e, &w, &self.scope),
                    Err(err) => Truth::Unknown(err.to_string()),
                })
            }
            Rule::If | Rule::IfHoare | Rule::IfLisbon => {
                arity(node, 2)?;
                let (p0, p1) = (premise_at(node, 0)?, premise_at(node, 1)?);
                let Command::If(b, c1, c2) = prog else {
                    return Err(reject(ReasonClass::ShapeMismatch, format!("`{prog}` is not an if")));
                };
                same_prog_step(c1, &p0.prog)?;
                same_prog_step(c2, &p1.prog)?;
                if node.rule == Rule::If {
                    self.side(cx, &format!("`{}` entails {b}", p0.pre), |i| self.entails(&apply(&p0.pre, i), b))?;
                    self.side(cx, &format!("`{}` entails ~{b}", p1.pre), |i| {
                        self.entails(&apply(&p1.pre, i), &not(b))
                    })?;
                    self.expect_congruent(pre, &oplus([p0.pre.clone(), p1.pre.clone()]), "precondition")?;
                    return self.expect_congruent(post, &oplus([p0.post.clone(), p1.post.clone()]), "postcondition");
                }
                let p = state_pred(pre)
                    .ok_or_else(|| reject(ReasonClass::ShapeMismatch, "precondition must be a state predicate"))?;
                let modal_ok = matches!(
                    (node.rule, post),
                    (Rule::IfHoare, Assertion::BoxT(_)) | (Rule::IfLisbon, Assertion::Dia(_))
                );
                shape(modal_ok, || format!("postcondition `{post}` has the wrong modality"))?;
                self.expect_congruent(&p0.pre, &Assertion::atom(conj(p, b)), "then precondition")?;
                self.expect_congruent(&p1.pre, &Assertion::atom(conj(p, &not(b))), "else precondition")?;
                self.expect_congruent(&p0.post, post, "then postcondition")?;
                self.expect_congruent(&p1.post, post, "else postcondition")
            }
            Rule::DivStar => {
                arity(node, 0)?;
                self.side(cx, &format!("`{pre}` is nonterminating"), |i| {
                    let z = apply(pre, i).normalize();
                    if z.is_nothing() || is_nonterminating(&z) {
                        Truth::Yes
                    } else {
                        self.implication(&z, &Assertion::AlwaysDiv)
                    }
                })?;
                self.expect_congruent(pre, post, "Div* keeps its assertion")
            }
            Rule::Assign => {
                arity(node, 0)?;
                shape(matches!(prog, Command::Act(_)), || format!("`{prog}` is not an assignment"))?;
                self.premise(cx, pre, prog, post, ReasonClass::SideConditionFailed, None)
            }
            Rule::Iter => self.check_iter(cx),
            Rule::While => self.check_while(cx),
            Rule::Variant => self.check_variant(cx),
            Rule::Invariant => self.check_invariant(cx),
            Rule::HoareVariant => self.check_hoare_variant(cx),
            Rule::QInvAngel | Rule::QInvDemon => self.check_qinv(cx),
        }
    }

    fn families(&self, node: &ProofNode) -> Result<(Schema, Schema, Schema), Rejection> {
        let phi = node
            .families
            .get("phi")
            .cloned()
            .ok_or_else(|| reject(ReasonClass::ShapeMismatch, "missing family phi"))?;
        let psi = node.families.get("psi").cloned().unwrap_or_else(|| nothing_family(&phi.index));
        let zeta = node.families.get("zeta").cloned().unwrap_or_else(|| nothing_family(&phi.index));
        Ok((phi, psi, zeta))
    }

    /// Certifies a limit and matches it against the declared one.
    fn limit(&self, cx: &mut NodeCtx, name: &str, fam: &Schema, kind: LimitKind) -> Result<Assertion, Rejection> {
        let declared = cx.node.limits.get(name).cloned().or_else(|| fam.limit.clone());
        let bare = Schema { limit: None, ..fam.clone() };
        let computed = match limit_of_family(&bare, kind, self.cfg.ncheck, &self.scope) {
            LimitVerdict::Certified(a) => Some(a),
            LimitVerdict::Obligation { checked_up_to, notes } => {
                let Some(d) = &declared else {
                    return Err(reject(
                        ReasonClass::ShapeMismatch,
                        format!("no certified limit for {name} and none declared"),
                    ));
                };
                cx.oblige(format!("limit of {name} is `{d}` ({})", notes.join("; ")), Some(checked_up_to));
                None
            }
        };
        match (computed, declared) {
            (Some(c), None) => Ok(c),
            (None, Some(d)) => Ok(d),
            (Some(c), Some(d)) => {
                if self.congruent(&c, &d) {
                    return Ok(d);
                }
                match self.implication(&c, &d) {
                    Truth::Yes => Ok(d),
                    Truth::No => {
                        Err(reject(ReasonClass::SideConditionFailed, format!("limit of {name} is `{c}`, not `{d}`")))
                    }
                    Truth::Unknown(r) => {
                        cx.oblige(format!("limit `{c}` of {name} implies `{d}`: {r}"), None);
                        Ok(d)
                    }
                }
            }
            (None, None) => unreachable!("handled above"),
        }
    }

    /// Records the `∀n` claim as an obligation unless every family is uniform past `ncheck`.
    fn forall_claim(&self, cx: &mut NodeCtx, fams: &[&Schema]) {
        let tail = fams.iter().map(|s| s.tail_start()).max().unwrap_or(0);
        if tail + 1 > self.cfg.ncheck {
            cx.oblige(format!("premises for every n (families fixed up to {tail})"), Some(self.cfg.ncheck));
        }
    }

    fn check_iter(&self, cx: &mut NodeCtx) -> Step {
        let node = cx.node;
        arity(node, 0)?;
        let Command::Iter(body, e, e2) = &node.prog else {
            return Err(reject(ReasonClass::ShapeMismatch, format!("`{}` is not an iteration", node.prog)));
        };
        let (phi, psi, zeta) = self.families(node)?;
        for n in 0..=self.cfg.ncheck {
            let (f, z) = (phi.instantiate(n), zeta.instantiate(n));
            self.side(cx, &format!("phi_{n} entails tru"), |i| self.entails(&apply(&f, i), &BExpr::True))?;
            self.side(cx, &format!("zeta_{n} is nonterminating"), |i| self.nonterminating(&apply(&z, i)))?;
        }
        let psi_inf = self.limit(cx, "psi", &psi, LimitKind::Converge)?;
        let zeta_inf = self.limit(cx, "zeta", &combine(&[&phi, &zeta]), LimitKind::Diverge)?;
        self.expect_congruent(&node.pre, &oplus([phi.instantiate(0), zeta.instantiate(0)]), "precondition")?;
        self.expect_congruent(&node.post, &oplus([psi_inf, zeta_inf]), "postcondition")?;
        let step = Command::seq(Command::Assume(e.clone()), (**body).clone());
        let exit = Command::Assume(e2.clone());
        let nc = Some(self.cfg.ncheck);
        for n in 0..=self.cfg.ncheck {
            let (f, z) = (phi.instantiate(n), zeta.instantiate(n));
            let next = oplus([phi.instantiate(n + 1), zeta.instantiate(n + 1)]);
            self.premise(cx, &oplus([f.clone(), z]), &step, &next, ReasonClass::PremiseFailed, nc)?;
            self.premise(cx, &f, &exit, &psi.instantiate(n), ReasonClass::PremiseFailed, nc)?;
        }
        self.forall_claim(cx, &[&phi, &psi, &zeta]);
        Ok(())
    }

    fn check_while(&self, cx: &mut NodeCtx) -> Step {
        let node = cx.node;
        arity(node, 0)?;
        let Command::While(b, body) = &node.prog else {
            return Err(reject(ReasonClass::ShapeMismatch, format!("`{}` is not a while loop", node.prog)));
        };
        let (phi, psi, zeta) = self.families(node)?;
        for n in 0..=self.cfg.ncheck {
            let (f, p, z) = (phi.instantiate(n), psi.instantiate(n), zeta.instantiate(n));
            self.side(cx, &format!("phi_{n} entails {b}"), |i| self.entails(&apply(&f, i), b))?;
            self.side(cx, &format!("psi_{n} entails ~{b}"), |i| self.entails(&apply(&p, i), &not(b)))?;
            self.side(cx, &format!("zeta_{n} is nonterminating"), |i| self.nonterminating(&apply(&z, i)))?;
        }
        let psi_inf = self.limit(cx, "psi", &psi, LimitKind::Converge)?;
        let zeta_inf = self.limit(cx, "zeta", &combine(&[&phi, &psi, &zeta]), LimitKind::Diverge)?;
        let pre0 = oplus([phi.instantiate(0), psi.instantiate(0), zeta.instantiate(0)]);
        self.expect_congruent(&node.pre, &pre0, "precondition")?;
        self.expect_congruent(&node.post, &oplus([psi_inf, zeta_inf]), "postcondition")?;
        let nc = Some(self.cfg.ncheck);
        for n in 0..=self.cfg.ncheck {
            let cur = oplus([phi.instantiate(n), zeta.instantiate(n)]);
            let next = oplus([phi.instantiate(n + 1), psi.instantiate(n + 1), zeta.instantiate(n + 1)]);
            self.premise(cx, &cur, body, &next, ReasonClass::PremiseFailed, nc)?;
        }
        self.forall_claim(cx, &[&phi, &psi, &zeta]);
        Ok(())
    }

    fn check_variant(&self, cx: &mut NodeCtx) -> Step {
        let node = cx.node;
        arity(node, 0)?;
        let Command::While(b, body) = &node.prog else {
            return Err(reject(ReasonClass::ShapeMismatch, format!("`{}` is not a while loop", node.prog)));
        };
        let (phi, _, _) = self.families(node)?;
        let Assertion::ExistsNat(k, inner) = &node.pre else {
            return Err(reject(ReasonClass::ShapeMismatch, "precondition must be `exists k : nat. phi_k`"));
        };
        for n in 0..=self.cfg.ncheck {
            self.expect_congruent(&inner.instantiate(k, n as i64), &phi.instantiate(n), &format!("phi_{n}"))?;
        }
        self.expect_congruent(&node.post, &phi.instantiate(0), "postcondition")?;
        let f0 = phi.instantiate(0);
        self.side(cx, &format!("phi_0 entails ~{b}"), |i| self.entails(&apply(&f0, i), &not(b)))?;
        for n in 0..self.cfg.ncheck {
            let f = phi.instantiate(n + 1);
            self.side(cx, &format!("phi_{} entails {b}", n + 1), |i| self.entails(&apply(&f, i), b))?;
            self.premise(cx, &f, body, &phi.instantiate(n), ReasonClass::PremiseFailed, Some(self.cfg.ncheck))?;
        }
        self.forall_claim(cx, &[&phi]);
        Ok(())
    }

    fn loop_parts<'n>(
        &self,
        node: &'n ProofNode,
    ) -> Result<(&'n BExpr, &'n Command, &'n BExpr, &'n ProofNode), Rejection> {
        arity(node, 1)?;
        let Command::While(b, body) = &node.prog else {
            return Err(reject(ReasonClass::ShapeMismatch, format!("`{}` is not a while loop", node.prog)));
        };
        let p = state_pred(&node.pre)
            .ok_or_else(|| reject(ReasonClass::ShapeMismatch, "precondition must be a state predicate"))?;
        let prem = premise_at(node, 0)?;
        same_prog_step(body, &prem.prog)?;
        Ok((b, body, p, prem))
    }

    fn check_invariant(&self, cx: &mut NodeCtx) -> Step {
        let (b, _, p, prem) = self.loop_parts(cx.node)?;
        self.expect_congruent(&cx.node.post, &Assertion::Box(conj(p, &not(b))), "postcondition")?;
        self.expect_congruent(&prem.pre, &Assertion::atom(conj(p, b)), "premise precondition")?;
        self.expect_congruent(&prem.post, &Assertion::Box(p.clone()), "premise postcondition")
    }

    fn check_hoare_variant(&self, cx: &mut NodeCtx) -> Step {
        let node = cx.node;
        let (b, _, full, prem) = self.loop_parts(node)?;
        let r = node
            .params
            .get("variant")
            .ok_or_else(|| reject(ReasonClass::ShapeMismatch, "missing parameter `variant`"))
            .and_then(|t| parse_expr(t).map_err(|e| reject(ReasonClass::ShapeMismatch, format!("variant: {e}"))))?;
        let idx = node.params.get("index").cloned().unwrap_or_else(|| "n".into());
        let nonneg = BExpr::cmp(CmpOp::Ge, r.clone(), Expr::num(0));
        let rest: Vec<&BExpr> = full.conjuncts().into_iter().filter(|c| **c != nonneg).collect();
        let p = rest.into_iter().cloned().reduce(BExpr::and).unwrap_or(BExpr::True);
        let positive = BExpr::cmp(CmpOp::Gt, r.clone(), Expr::num(0));
        let guard = conj(&p, b);
        self.side(cx, &format!("{guard} implies {positive}"), |_| {
            match pred_implies(&guard, &positive, &self.scope) {
                Some(v) => Truth::from_bool(v),
                None => Truth::Unknown("not decided".into()),
            }
        })?;
        self.expect_congruent(&node.post, &Assertion::BoxT(conj(&p, &not(b))), "postcondition")?;
        let at = BExpr::cmp(CmpOp::Eq, r.clone(), Expr::var(&idx));
        let below = BExpr::cmp(CmpOp::Lt, r, Expr::var(&idx));
        self.expect_congruent(&prem.pre, &Assertion::atom(conj(&guard, &at)), "premise precondition")?;
        self.expect_congruent(&prem.post, &Assertion::BoxT(conj(&p, &below)), "premise postcondition")
    }

    fn check_qinv(&self, cx: &mut NodeCtx) -> Step {
        let node = cx.node;
        let (b, _, p, prem) = self.loop_parts(node)?;
        let (goal, step) = match node.rule {
            Rule::QInvAngel => (Assertion::SometimesDiv, Assertion::Dia(p.clone())),
            _ => (Assertion::AlwaysDiv, Assertion::Box(p.clone())),
        };
        self.side(cx, &format!("{p} entails {b}"), |_| match pred_implies(p, b, &self.scope) {
            Some(v) => Truth::from_bool(v),
            None => Truth::Unknown("not decided".into()),
        })?;
        self.expect_congruent(&node.post, &goal, "postcondition")?;
        self.expect_congruent(&prem.pre, &node.pre, "premise precondition")?;
        self.expect_congruent(&prem.post, &step, "premise postcondition")
    }

    fn check_rec(&self, node: &ProofNode, path: &str, binders: &[Vec<Inst>], out: &mut Walk) -> NodeVerdict {
        let slot = out.nodes.len();
        out.nodes.push(NodeReport { path: path.to_string(), rule: node.rule, verdict: NodeVerdict::Accepted });
        let inner = self.child_binders(node, binders);
        let mut child_rejected = None;
        let mut obligations = Vec::new();
        for (i, p) in node.premises.iter().enumerate() {
            if out.stopped {
                break;
            }
            let cp = child_path(path, &i.to_string());
            match self.check_rec(p, &cp, &inner, out) {
                NodeVerdict::Rejected(_) => {
                    child_rejected.get_or_insert(display_path(&cp));
                }
                NodeVerdict::AcceptedWithObligations { obligations: o } => obligations.extend(o),
                NodeVerdict::Accepted => {}
            }
        }
        let verdict = if let Some(i) = child_rejected.as_ref().filter(|_| out.stopped) {
            NodeVerdict::Rejected(reject(ReasonClass::PremiseFailed, format!("premise {i} rejected")))
        } else {
            let mut cx = NodeCtx { node, path, binders, obligations: Vec::new() };
            let own = self.check_own(&mut cx);
            match (own, child_rejected) {
                (Err(r), _) => {
                    if out.origin.is_none() {
                        out.origin = Some(NodeReport {
                            path: path.to_string(),
                            rule: node.rule,
                            verdict: NodeVerdict::Rejected(r.clone()),
                        });
                    }
                    if self.cfg.fail_fast {
                        out.stopped = true;
                    }
                    NodeVerdict::Rejected(r)
                }
                (Ok(()), Some(c)) => {
                    NodeVerdict::Rejected(reject(ReasonClass::PremiseFailed, format!("premise {c} rejected")))
                }
                (Ok(()), None) => {
                    let mut all = cx.obligations;
                    all.extend(obligations);
                    if all.is_empty() {
                        NodeVerdict::Accepted
                    } else {
                        NodeVerdict::AcceptedWithObligations { obligations: all }
                    }
                }
            }
        };
        out.nodes[slot].verdict = verdict.clone();
        verdict
    }
}

#[derive(Default)]
struct Walk {
    nodes: Vec<NodeReport>,
    origin: Option<NodeReport>,
    stopped: bool,
}

fn scope_for(proof: &Proof) -> Scope {
    let mut scope = Scope::new(proof.semiring);
    if let Some(d) = &proof.domain {
        scope = scope.with_domain(d.clone());
    }
    scope
}

/// Checks every node of the proof, children before parents.
pub fn check_proof(proof: &Proof, cfg: &CheckConfig) -> CheckReport {
    let checker = Checker { proof, cfg, scope: scope_for(proof) };
    let mut walk = Walk::default();
    let root = checker.check_rec(&proof.root, "", &[], &mut walk);
    let obligations = match &root {
        NodeVerdict::AcceptedWithObligations { obligations } => obligations.clone(),
        _ => Vec::new(),
    };
    CheckReport { root, nodes: walk.nodes, obligations, origin: walk.origin }
}

/// Checks one node on its own, ignoring the verdicts of its premises.
pub fn check_node(proof: &Proof, node: &ProofNode, cfg: &CheckConfig) -> NodeVerdict {
    let checker = Checker { proof, cfg, scope: scope_for(proof) };
    checker.own_verdict(node, "", &[])
}

/// Checks the node at `path` under the binders of its ancestors, ignoring
/// the verdicts of its premises.
pub fn check_at(proof: &Proof, path: &str, cfg: &CheckConfig) -> Option<NodeVerdict> {
    let checker = Checker { proof, cfg, scope: scope_for(proof) };
    let mut node = &proof.root;
    let mut binders = Vec::new();
    for step in path.split('.').filter(|s| !s.is_empty()) {
        binders = checker.child_binders(node, &binders);
        node = node.premises.get(step.parse::<usize>().ok()?)?;
    }
    Some(checker.own_verdict(node, path, &binders))
}

impl Checker<'_> {
    fn own_verdict(&self, node: &ProofNode, path: &str, binders: &[Vec<Inst>]) -> NodeVerdict {
        let mut cx = NodeCtx { node, path, binders, obligations: Vec::new() };
        match self.check_own(&mut cx) {
            Err(r) => NodeVerdict::Rejected(r),
            Ok(()) if cx.obligations.is_empty() => NodeVerdict::Accepted,
            Ok(()) => NodeVerdict::AcceptedWithObligations { obligations: cx.obligations },
        }
    }
}
