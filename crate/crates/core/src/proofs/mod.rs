//! Derivation trees for outcome triples and their checker.
//!
//! A proof is a JSON tree of rule applications. Each node states its
//! conclusion triple; the checker matches it against the rule's form,
//! discharges side conditions and semantically checks the universally
//! quantified premises of the loop rules up to a bound.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assertions::{parse_assertion, parse_schema, Assertion, Schema};
use crate::lang::{parse_program, Command};
use crate::semiring::Semiring;
use crate::transformers::{FiniteDomain, TripleConfig};

mod check;
mod elaborate;
mod mutate;
#[cfg(test)]
mod tests;

pub use check::{check_at, check_node, check_proof};
pub use elaborate::elaborate_derived;
pub use mutate::{mutants, Mutant, Mutation};

#[derive(Debug, Error)]
pub enum ProofError {
    #[error("proof file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read {0}: {1}")]
    Io(String, String),
    #[error("node {path}: {msg}")]
    Parse { path: String, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    False,
    True,
    Div,
    Scale,
    Disj,
    Conj,
    Choice,
    Exists,
    Consequence,
    Skip,
    Seq,
    Plus,
    Assume,
    Iter,
    #[serde(alias = "Div*")]
    DivStar,
    If,
    While,
    Variant,
    Invariant,
    HoareVariant,
    QInvAngel,
    QInvDemon,
    SeqTotalHoare,
    SeqLisbon,
    IfHoare,
    IfLisbon,
    Assign,
}

impl Rule {
    pub const ALL: [Rule; 27] = [
        Rule::False,
        Rule::True,
        Rule::Div,
        Rule::Scale,
        Rule::Disj,
        Rule::Conj,
        Rule::Choice,
        Rule::Exists,
        Rule::Consequence,
        Rule::Skip,
        Rule::Seq,
        Rule::Plus,
        Rule::Assume,
        Rule::Iter,
        Rule::DivStar,
        Rule::If,
        Rule::While,
        Rule::Variant,
        Rule::Invariant,
        Rule::HoareVariant,
        Rule::QInvAngel,
        Rule::QInvDemon,
        Rule::SeqTotalHoare,
        Rule::SeqLisbon,
        Rule::IfHoare,
        Rule::IfLisbon,
        Rule::Assign,
    ];

    /// Rules derivable from the others, which `elaborate_derived` may expand.
    pub fn is_derived(self) -> bool {
        matches!(
            self,
            Rule::DivStar
                | Rule::If
                | Rule::While
                | Rule::Variant
                | Rule::Invariant
                | Rule::HoareVariant
                | Rule::QInvAngel
                | Rule::QInvDemon
                | Rule::SeqTotalHoare
                | Rule::SeqLisbon
                | Rule::IfHoare
                | Rule::IfLisbon
        )
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Where a node's program text comes from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProgRef {
    Inline(String),
    File { file: String },
}

/// A node as written in a proof file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawNode {
    pub rule: Rule,
    pub pre: String,
    pub prog: ProgRef,
    pub post: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub premises: Vec<RawNode>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub families: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub limits: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
}

fn default_semiring() -> String {
    "bool".into()
}

/// A proof file: the semiring, the variables and optional finite domain
/// used for semantic checks, and the derivation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawProof {
    #[serde(default = "default_semiring")]
    pub semiring: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vars: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    pub proof: RawNode,
}

/// A parsed derivation node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofNode {
    pub rule: Rule,
    pub pre: Assertion,
    pub prog: Command,
    pub post: Assertion,
    pub premises: Vec<ProofNode>,
    /// Indexed families `phi`, `psi`, `zeta` of the loop rules.
    pub families: BTreeMap<String, Schema>,
    /// Declared limits `psi` and `zeta` of the loop rules.
    pub limits: BTreeMap<String, Assertion>,
    /// Rule parameters, e.g. `variant` and `index` for `HoareVariant`.
    pub params: BTreeMap<String, String>,
}

impl ProofNode {
    pub fn new(rule: Rule, pre: Assertion, prog: Command, post: Assertion) -> ProofNode {
        ProofNode {
            rule,
            pre,
            prog,
            post,
            premises: Vec::new(),
            families: BTreeMap::new(),
            limits: BTreeMap::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn with_premises(mut self, premises: Vec<ProofNode>) -> ProofNode {
        self.premises = premises;
        self
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(ProofNode::size).sum::<usize>()
    }

    /// The node at a dotted path such as `0.1`; the empty path is the root.
    pub fn at(&self, path: &str) -> Option<&ProofNode> {
        let mut n = self;
        for step in path.split('.').filter(|s| !s.is_empty()) {
            n = n.premises.get(step.parse::<usize>().ok()?)?;
        }
        Some(n)
    }

    pub fn at_mut(&mut self, path: &str) -> Option<&mut ProofNode> {
        let mut n = self;
        for step in path.split('.').filter(|s| !s.is_empty()) {
            n = n.premises.get_mut(step.parse::<usize>().ok()?)?;
        }
        Some(n)
    }

    /// Paths of every node in depth-first order.
    pub fn paths(&self) -> Vec<String> {
        let mut out = vec![String::new()];
        for (i, p) in self.premises.iter().enumerate() {
            out.extend(p.paths().into_iter().map(|s| child_path(&i.to_string(), &s)));
        }
        out
    }

    /// `header` declares the variables of inline programs that lack a `vars` line.
    fn from_raw(
        raw: &RawNode,
        base: Option<&Path>,
        path: &str,
        header: Option<&[String]>,
    ) -> Result<ProofNode, ProofError> {
        let err = |msg: String| ProofError::Parse { path: display_path(path), msg };
        let pre = parse_assertion(&raw.pre).map_err(|e| err(format!("pre: {e}")))?;
        let post = parse_assertion(&raw.post).map_err(|e| err(format!("post: {e}")))?;
        let text = match (&raw.prog, header) {
            (ProgRef::Inline(t), Some(vs)) if !t.trim_start().starts_with("vars ") => {
                format!("vars {}\n{t}", vs.join(", "))
            }
            (ProgRef::Inline(t), _) => t.clone(),
            (ProgRef::File { file }, _) => {
                let p = base.map_or_else(|| Path::new(file).to_path_buf(), |b| b.join(file));
                std::fs::read_to_string(&p).map_err(|e| ProofError::Io(p.display().to_string(), e.to_string()))?
            }
        };
        let parsed = parse_program(&text).map_err(|e| err(format!("prog: {e}")))?;
        let inner = match &raw.prog {
            ProgRef::File { .. } => Some(parsed.vars.as_slice()),
            ProgRef::Inline(_) => header,
        };
        let mut families = BTreeMap::new();
        for (k, v) in &raw.families {
            families.insert(k.clone(), parse_schema(v).map_err(|e| err(format!("family {k}: {e}")))?);
        }
        let mut limits = BTreeMap::new();
        for (k, v) in &raw.limits {
            limits.insert(k.clone(), parse_assertion(v).map_err(|e| err(format!("limit {k}: {e}")))?);
        }
        let premises = raw
            .premises
            .iter()
            .enumerate()
            .map(|(i, r)| ProofNode::from_raw(r, base, &child_path(path, &i.to_string()), inner))
            .collect::<Result<_, _>>()?;
        Ok(ProofNode {
            rule: raw.rule,
            pre,
            prog: parsed.body,
            post,
            premises,
            families,
            limits,
            params: raw.params.clone(),
        })
    }

    pub fn to_raw(&self) -> RawNode {
        RawNode {
            rule: self.rule,
            pre: self.pre.to_string(),
            prog: ProgRef::Inline(self.prog.to_string()),
            post: self.post.to_string(),
            premises: self.premises.iter().map(ProofNode::to_raw).collect(),
            families: self.families.iter().map(|(k, v)| (k.clone(), v.to_string())).collect(),
            limits: self.limits.iter().map(|(k, v)| (k.clone(), v.to_string())).collect(),
            params: self.params.clone(),
        }
    }
}

pub(crate) fn child_path(parent: &str, i: &str) -> String {
    if parent.is_empty() {
        i.to_string()
    } else {
        format!("{parent}.{i}")
    }
}

pub(crate) fn display_path(path: &str) -> String {
    if path.is_empty() {
        "root".into()
    } else {
        path.to_string()
    }
}

/// A parsed proof with the context its semantic checks run in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Proof {
    pub semiring: Semiring,
    /// Program variables bound by sampled states.
    pub vars: Vec<String>,
    pub domain: Option<FiniteDomain>,
    pub root: ProofNode,
}

impl Proof {
    /// Parses a proof file; `base` resolves `{"file": ...}` program references.
    pub fn from_json(text: &str, base: Option<&Path>) -> Result<Proof, ProofError> {
        let raw: RawProof = serde_json::from_str(text)?;
        Proof::from_raw(&raw, base)
    }

    pub fn from_raw(raw: &RawProof, base: Option<&Path>) -> Result<Proof, ProofError> {
        let perr = |msg: String| ProofError::Parse { path: "header".into(), msg };
        let semiring = Semiring::from_name(&raw.semiring).map_err(|e| perr(e.to_string()))?;
        let domain = raw.domain.as_deref().map(FiniteDomain::parse).transpose().map_err(|e| perr(e.to_string()))?;
        let mut vars = raw.vars.clone();
        if vars.is_empty() {
            if let Some(d) = &domain {
                vars = d.vars().map(str::to_string).collect();
            }
        }
        let header = (!vars.is_empty()).then_some(vars.as_slice());
        let root = ProofNode::from_raw(&raw.proof, base, "", header)?;
        if vars.is_empty() {
            let mut fv = Default::default();
            root.prog.free_vars(&mut fv);
            vars = fv.into_iter().filter(|v: &String| !v.ends_with("[]")).collect();
        }
        Ok(Proof { semiring, vars, domain, root })
    }

    pub fn load(path: &Path) -> Result<Proof, ProofError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ProofError::Io(path.display().to_string(), e.to_string()))?;
        Proof::from_json(&text, path.parent())
    }

    pub fn to_raw(&self) -> RawProof {
        RawProof {
            semiring: self.semiring.name().to_string(),
            vars: self.vars.clone(),
            domain: self.domain.as_ref().map(ToString::to_string),
            proof: self.root.to_raw(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("proofs serialize")
    }

    pub fn with_root(&self, root: ProofNode) -> Proof {
        Proof { root, ..self.clone() }
    }
}

#[derive(Clone, Debug)]
pub struct CheckConfig {
    /// Largest index at which `∀n` premises are instantiated.
    pub ncheck: u64,
    pub triple: TripleConfig,
    /// Sampled preconditions per predicate when no exhaustive set is available.
    pub sample_cap: usize,
    /// Largest number of instantiations of bound logical variables.
    pub instance_cap: usize,
    /// Stop at the first rejected node.
    pub fail_fast: bool,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { ncheck: 16, triple: TripleConfig::default(), sample_cap: 6, instance_cap: 4096, fail_fast: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReasonClass {
    /// The conclusion or premises do not have the rule's form.
    ShapeMismatch,
    /// An entailment, implication, limit or assignment check failed.
    SideConditionFailed,
    /// A premise triple is invalid or a premise node was rejected.
    PremiseFailed,
}

impl fmt::Display for ReasonClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReasonClass::ShapeMismatch => "shape-mismatch",
            ReasonClass::SideConditionFailed => "side-condition-failed",
            ReasonClass::PremiseFailed => "premise-failed",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub class: ReasonClass,
    pub detail: String,
}

/// A claim that was checked only partially.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Obligation {
    pub node: String,
    pub rule: Rule,
    pub claim: String,
    /// Largest index up to which the claim was spot-checked.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checked_up_to: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum NodeVerdict {
    Accepted,
    Rejected(Rejection),
    AcceptedWithObligations { obligations: Vec<Obligation> },
}

impl NodeVerdict {
    pub fn is_accepted(&self) -> bool {
        !self.is_rejected()
    }

    pub fn is_rejected(&self) -> bool {
        matches!(self, NodeVerdict::Rejected(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            NodeVerdict::Accepted => "accepted",
            NodeVerdict::Rejected(_) => "rejected",
            NodeVerdict::AcceptedWithObligations { .. } => "accepted-with-obligations",
        }
    }
}

impl fmt::Display for NodeVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeVerdict::Accepted => write!(f, "accepted"),
            NodeVerdict::Rejected(r) => write!(f, "rejected ({}: {})", r.class, r.detail),
            NodeVerdict::AcceptedWithObligations { obligations } => {
                write!(f, "accepted with {} obligation(s)", obligations.len())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeReport {
    pub path: String,
    pub rule: Rule,
    pub verdict: NodeVerdict,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub root: NodeVerdict,
    /// Every checked node in depth-first order.
    pub nodes: Vec<NodeReport>,
    pub obligations: Vec<Obligation>,
    /// The node whose own check failed first, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origin: Option<NodeReport>,
}

impl CheckReport {
    pub fn is_accepted(&self) -> bool {
        self.root.is_accepted()
    }

    /// Accepted with every claim fully discharged.
    pub fn is_clean(&self) -> bool {
        self.root == NodeVerdict::Accepted
    }

    /// Class of the originating rejection.
    pub fn rejection_class(&self) -> Option<ReasonClass> {
        match &self.origin.as_ref()?.verdict {
            NodeVerdict::Rejected(r) => Some(r.class),
            _ => None,
        }
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.root)?;
        if let Some(o) = &self.origin {
            writeln!(f, "  at {} ({}): {}", display_path(&o.path), o.rule, o.verdict)?;
        }
        for ob in &self.obligations {
            let bound = ob.checked_up_to.map(|n| format!(" [checked up to {n}]")).unwrap_or_default();
            writeln!(f, "  obligation at {} ({}): {}{bound}", display_path(&ob.node), ob.rule, ob.claim)?;
        }
        Ok(())
    }
}
