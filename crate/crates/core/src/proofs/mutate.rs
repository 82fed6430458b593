//! Mutation operators producing broken variants of a valid proof.

use std::fmt;

use super::{check_at, CheckConfig, Proof, ProofNode, ReasonClass, Rule};
use crate::assertions::{oplus, Assertion, Schema, WExpr};
use crate::lang::{parse_expr, Action, BExpr, Command, Expr};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    /// Exchange the two premises of an order-sensitive rule.
    SwapPremises,
    /// Remove the last premise.
    DropPremise,
    /// Relabel the node as `Skip`.
    RuleToSkip,
    /// Re-index the `phi` family so that member `n` is the old member `n + 1`.
    ShiftFamily,
    /// Decrease the Hoare variant by one.
    VariantOffByOne,
    /// Weaken a quasi-invariant to `tru`.
    QuasiInvariantTrue,
    /// Replace a consequence precondition by `TOP`.
    ConsequencePreTop,
    /// Make the nested-divergence family terminating.
    TerminatingZeta,
    /// Add one to an assigned expression.
    AssignOffByOne,
    /// Add divergence to the precondition of a `Plus`.
    PlusPreDiv,
}

impl Mutation {
    pub const ALL: [Mutation; 10] = [
        Mutation::SwapPremises,
        Mutation::DropPremise,
        Mutation::RuleToSkip,
        Mutation::ShiftFamily,
        Mutation::VariantOffByOne,
        Mutation::QuasiInvariantTrue,
        Mutation::ConsequencePreTop,
        Mutation::TerminatingZeta,
        Mutation::AssignOffByOne,
        Mutation::PlusPreDiv,
    ];

    /// The class the checker must report for a mutant.
    pub fn expected(self) -> ReasonClass {
        match self {
            Mutation::SwapPremises | Mutation::DropPremise | Mutation::RuleToSkip | Mutation::ShiftFamily => {
                ReasonClass::ShapeMismatch
            }
            _ => ReasonClass::SideConditionFailed,
        }
    }

    /// Applies the mutation to one node, or `None` when it does not apply.
    pub fn apply(self, n: &ProofNode) -> Option<ProofNode> {
        let mut m = n.clone();
        match self {
            Mutation::SwapPremises => {
                let order_sensitive = matches!(
                    n.rule,
                    Rule::Seq
                        | Rule::SeqTotalHoare
                        | Rule::SeqLisbon
                        | Rule::If
                        | Rule::IfHoare
                        | Rule::IfLisbon
                        | Rule::Plus
                );
                let [a, b] = n.premises.as_slice() else { return None };
                if !order_sensitive || a.prog == b.prog {
                    return None;
                }
                m.premises.swap(0, 1);
            }
            Mutation::DropPremise => {
                m.premises.pop()?;
            }
            Mutation::RuleToSkip => {
                if n.rule == Rule::Skip || n.prog == Command::Skip {
                    return None;
                }
                m.rule = Rule::Skip;
            }
            Mutation::ShiftFamily => {
                if !matches!(n.rule, Rule::Iter | Rule::While | Rule::Variant) {
                    return None;
                }
                let phi = n.families.get("phi")?;
                m.families.insert("phi".into(), shift(phi));
            }
            Mutation::VariantOffByOne => {
                let r = parse_expr(n.params.get("variant")?).ok()?;
                m.params.insert("variant".into(), Expr::Sub(Box::new(r), Box::new(Expr::num(1))).to_string());
            }
            Mutation::QuasiInvariantTrue => {
                if !matches!(n.rule, Rule::QInvAngel | Rule::QInvDemon) {
                    return None;
                }
                m.pre = Assertion::atom(BExpr::True);
            }
            Mutation::ConsequencePreTop => {
                if n.rule != Rule::Consequence || n.pre == Assertion::Top {
                    return None;
                }
                m.pre = Assertion::Top;
            }
            Mutation::TerminatingZeta => {
                if !matches!(n.rule, Rule::Iter | Rule::While) {
                    return None;
                }
                let index = n.families.get("phi")?.index.clone();
                m.families.insert("zeta".into(), Schema::uniform(&index, Assertion::atom(BExpr::True)));
            }
            Mutation::AssignOffByOne => {
                let Command::Act(Action::Assign(l, e)) = &n.prog else { return None };
                if n.rule != Rule::Assign {
                    return None;
                }
                let e = Expr::Add(Box::new(e.clone()), Box::new(Expr::num(1)));
                m.prog = Command::Act(Action::Assign(l.clone(), e));
            }
            Mutation::PlusPreDiv => {
                if n.rule != Rule::Plus {
                    return None;
                }
                m.pre = oplus([n.pre.clone(), Assertion::Div(WExpr::one())]);
            }
        }
        Some(m)
    }
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

fn shift(s: &Schema) -> Schema {
    let next = Expr::Add(Box::new(Expr::var(&s.index)), Box::new(Expr::num(1)));
    Schema {
        index: s.index.clone(),
        cases: s.cases.iter().filter(|(k, _)| **k > 0).map(|(k, a)| (k - 1, a.clone())).collect(),
        default: s.default.subst(&s.index, &next),
        limit: s.limit.clone(),
    }
}

/// A mutated proof with the node that was changed.
#[derive(Clone, Debug)]
pub struct Mutant {
    pub mutation: Mutation,
    pub path: String,
    pub proof: Proof,
}

impl Mutant {
    /// The class the checker must report. A changed assignment that is still
    /// valid on its own is caught one level up, where the programs no longer agree.
    pub fn expected(&self, cfg: &CheckConfig) -> ReasonClass {
        if self.mutation == Mutation::AssignOffByOne
            && !check_at(&self.proof, &self.path, cfg).is_some_and(|v| v.is_rejected())
        {
            return ReasonClass::ShapeMismatch;
        }
        self.mutation.expected()
    }
}

/// Every applicable single-node mutation of `proof`, in tree order.
pub fn mutants(proof: &Proof) -> Vec<Mutant> {
    let mut out = Vec::new();
    for path in proof.root.paths() {
        let node = proof.root.at(&path).expect("listed path");
        for mutation in Mutation::ALL {
            if let Some(changed) = mutation.apply(node) {
                let mut root = proof.root.clone();
                *root.at_mut(&path).expect("listed path") = changed;
                out.push(Mutant { mutation, path: path.clone(), proof: proof.with_root(root) });
            }
        }
    }
    out
}
