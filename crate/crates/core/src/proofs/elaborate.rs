//! Expansion of derived rules into core-rule derivations.

use super::check::combine;
use super::{ProofNode, Rule};
use crate::assertions::{is_nonterminating, oplus, Assertion, WExpr};
use crate::lang::{BExpr, Command, Guard};

fn node(rule: Rule, pre: Assertion, prog: Command, post: Assertion) -> ProofNode {
    ProofNode::new(rule, pre, prog, post)
}

fn scale(a: Assertion, u: i64) -> Assertion {
    Assertion::ScaleR(Box::new(a), WExpr::int(u))
}

/// `⟨φ1⟩ assume b ⟨φ1⊙1⟩ ⊕ ⟨φ2⟩ assume b ⟨φ2⊙0⟩` via Choice.
fn filter(b: &BExpr, keep: &Assertion, drop: &Assertion) -> ProofNode {
    let c = Command::assume_bool(b.clone());
    let pre = oplus([keep.clone(), drop.clone()]);
    let post = oplus([scale(keep.clone(), 1), scale(drop.clone(), 0)]);
    node(Rule::Choice, pre, c.clone(), post).with_premises(vec![
        node(Rule::Assume, keep.clone(), c.clone(), scale(keep.clone(), 1)),
        node(Rule::Assume, drop.clone(), c, scale(drop.clone(), 0)),
    ])
}

/// One branch of the if: filter, then run the branch on the kept part and
/// discard the rest with a zero-scaled `True`.
fn branch(b: &BExpr, keep: &Assertion, drop: &Assertion, body: &Command, prem: &ProofNode) -> ProofNode {
    let prog = Command::seq(Command::assume_bool(b.clone()), body.clone());
    let mid = oplus([scale(keep.clone(), 1), scale(drop.clone(), 0)]);
    let kept = node(Rule::Scale, scale(keep.clone(), 1), body.clone(), scale(prem.post.clone(), 1))
        .with_premises(vec![elaborate_derived(prem)]);
    let dropped = node(Rule::Scale, scale(drop.clone(), 0), body.clone(), scale(Assertion::Top, 0))
        .with_premises(vec![node(Rule::True, drop.clone(), body.clone(), Assertion::Top)]);
    let run_post = oplus([scale(prem.post.clone(), 1), scale(Assertion::Top, 0)]);
    let run = node(Rule::Choice, mid.clone(), body.clone(), run_post.clone()).with_premises(vec![kept, dropped]);
    node(Rule::Seq, oplus([keep.clone(), drop.clone()]), prog, run_post).with_premises(vec![filter(b, keep, drop), run])
}

fn elaborate_if(n: &ProofNode) -> Option<ProofNode> {
    let Command::If(b, c1, c2) = &n.prog else { return None };
    let [p1, p2] = n.premises.as_slice() else { return None };
    let nb = BExpr::not(b.clone());
    let left = branch(b, &p1.pre, &p2.pre, c1, p1);
    let right = branch(&nb, &p2.pre, &p1.pre, c2, p2);
    let plus_post = oplus([left.post.clone(), right.post.clone()]);
    let plus_prog = Command::choice(left.prog.clone(), right.prog.clone());
    let pre = oplus([p1.pre.clone(), p2.pre.clone()]);
    let plus = node(Rule::Plus, pre.clone(), plus_prog, plus_post).with_premises(vec![left, right]);
    Some(node(Rule::Consequence, n.pre.clone(), n.prog.clone(), n.post.clone()).with_premises(vec![plus]))
}

fn elaborate_while(n: &ProofNode) -> Option<ProofNode> {
    let Command::While(b, body) = &n.prog else { return None };
    let phi = n.families.get("phi")?;
    let mut families = n.families.clone();
    if let Some(psi) = n.families.get("psi") {
        families.insert("phi".into(), combine(&[phi, psi]));
    }
    let prog = Command::Iter(body.clone(), Guard::Bool(b.clone()), Guard::Bool(BExpr::not(b.clone())));
    let mut out = node(Rule::Iter, n.pre.clone(), prog, n.post.clone());
    out.families = families;
    out.limits = n.limits.clone();
    Some(out)
}

fn elaborate_div_star(n: &ProofNode) -> Option<ProofNode> {
    let pre = n.pre.normalize();
    let u = || WExpr::Var("u".into());
    match &pre {
        Assertion::Div(_) => Some(node(Rule::Div, n.pre.clone(), n.prog.clone(), n.post.clone())),
        _ if pre.is_nothing() => {
            let zero = Assertion::Div(WExpr::zero());
            let div = node(Rule::Div, zero.clone(), n.prog.clone(), zero);
            Some(node(Rule::Consequence, n.pre.clone(), n.prog.clone(), n.post.clone()).with_premises(vec![div]))
        }
        Assertion::AlwaysDiv | Assertion::ExistsWeight { .. } if is_nonterminating(&pre) => {
            let ex =
                Assertion::ExistsWeight { vars: vec!["u".into()], nonzero: false, body: Box::new(Assertion::Div(u())) };
            let div = node(Rule::Div, Assertion::Div(u()), n.prog.clone(), Assertion::Div(u()));
            let exists = node(Rule::Exists, ex.clone(), n.prog.clone(), ex).with_premises(vec![div]);
            Some(node(Rule::Consequence, n.pre.clone(), n.prog.clone(), n.post.clone()).with_premises(vec![exists]))
        }
        _ => None,
    }
}

/// Rewrites `If`, `While` and `Div*` nodes into core rules, recursively.
/// Other derived rules are kept and checked by their own procedures.
pub fn elaborate_derived(n: &ProofNode) -> ProofNode {
    let expanded = match n.rule {
        Rule::If => elaborate_if(n),
        Rule::While => elaborate_while(n),
        Rule::DivStar => elaborate_div_star(n),
        _ => None,
    };
    match expanded {
        Some(e) if n.rule == Rule::If => e,
        Some(e) => ProofNode { premises: e.premises.iter().map(elaborate_derived).collect(), ..e },
        None => ProofNode { premises: n.premises.iter().map(elaborate_derived).collect(), ..n.clone() },
    }
}
