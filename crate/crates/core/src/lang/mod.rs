//! The weighted imperative language: states, syntax trees, desugaring and
//! expression evaluation.

mod eval;
mod parse;
mod pretty;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::semiring::{fmt_rational, parse_rational, Rational, Weight};

pub(crate) use eval::index_name;
pub use eval::{eval_bool, eval_expr, eval_guard, eval_test, is_closed, nonneg_increment};
pub use parse::{parse_bexpr, parse_expr, parse_program, ParseError, Parser, Tok, Token};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LangError {
    #[error(transparent)]
    Syntax(#[from] ParseError),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("probabilistic choice weight {0} is outside [0, 1]")]
    BadChoiceWeight(String),
}

/// A program state: variable bindings to exact rationals, ordered by name.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State(BTreeMap<String, Rational>);

impl State {
    pub fn new() -> State {
        State(BTreeMap::new())
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, Rational)>) -> State {
        State(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    /// Every variable bound to zero.
    pub fn zeros(vars: &[String]) -> State {
        State(vars.iter().map(|v| (v.clone(), Rational::default())).collect())
    }

    pub fn get(&self, var: &str) -> Option<&Rational> {
        self.0.get(var)
    }

    pub fn set(&mut self, var: &str, val: Rational) {
        self.0.insert(var.to_string(), val);
    }

    pub fn with(&self, var: &str, val: Rational) -> State {
        let mut s = self.clone();
        s.set(var, val);
        s
    }

    pub fn vars(&self) -> impl Iterator<Item = &String> {
        self.0.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Rational)> {
        self.0.iter()
    }

    /// Parses `x=1, y=-1/2` (without the surrounding parentheses).
    pub fn parse_bindings(text: &str) -> Result<State, String> {
        let mut s = State::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| format!("expected `var=value`, got `{part}`"))?;
            let val = parse_rational(v).ok_or_else(|| format!("bad value `{v}`"))?;
            s.set(k.trim(), val);
        }
        Ok(s)
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={}", fmt_rational(v))).collect();
        write!(f, "({})", parts.join(","))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Num(Rational),
    Var(String),
    /// `A[e]`, resolved to the scalar variable `A<value of e>`.
    Index(String, Box<Expr>),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BExpr {
    True,
    False,
    Cmp(CmpOp, Expr, Expr),
    Not(Box<BExpr>),
    And(Box<BExpr>, Box<BExpr>),
    Or(Box<BExpr>, Box<BExpr>),
    /// `forall k in lo..hi. b`, with `hi` exclusive.
    Forall(String, Expr, Expr, Box<BExpr>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Guard {
    Bool(BExpr),
    Const(Weight),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LValue {
    Var(String),
    Index(String, Expr),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Assign(LValue, Expr),
    /// Nondeterministically sets the variable to 0 or 1.
    NondetFlag(LValue),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Command {
    Skip,
    Assume(Guard),
    Act(Action),
    Seq(Box<Command>, Box<Command>),
    Choice(Box<Command>, Box<Command>),
    Iter(Box<Command>, Guard, Guard),
    If(BExpr, Box<Command>, Box<Command>),
    While(BExpr, Box<Command>),
    ProbChoice(Rational, Box<Command>, Box<Command>),
}

/// A parsed program with its declared variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub vars: Vec<String>,
    pub body: Command,
}

impl Expr {
    pub fn num(n: i64) -> Expr {
        Expr::Num(crate::semiring::rat_int(n))
    }

    pub fn var(v: &str) -> Expr {
        Expr::Var(v.to_string())
    }

    /// Replaces free occurrences of `var` by `by`.
    pub fn subst(&self, var: &str, by: &Expr) -> Expr {
        let s = |e: &Expr| Box::new(e.subst(var, by));
        match self {
            Expr::Var(v) if v == var => by.clone(),
            Expr::Num(_) | Expr::Var(_) => self.clone(),
            Expr::Index(a, i) => Expr::Index(a.clone(), s(i)),
            Expr::Neg(a) => Expr::Neg(s(a)),
            Expr::Add(a, b) => Expr::Add(s(a), s(b)),
            Expr::Sub(a, b) => Expr::Sub(s(a), s(b)),
            Expr::Mul(a, b) => Expr::Mul(s(a), s(b)),
            Expr::Pow(a, b) => Expr::Pow(s(a), s(b)),
        }
    }

    pub fn free_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Index(a, i) => {
                out.insert(format!("{a}[]"));
                i.free_vars(out);
            }
            Expr::Neg(a) => a.free_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Pow(a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
        }
    }
}

impl BExpr {
    pub fn not(b: BExpr) -> BExpr {
        match b {
            BExpr::True => BExpr::False,
            BExpr::False => BExpr::True,
            other => BExpr::Not(Box::new(other)),
        }
    }

    pub fn and(a: BExpr, b: BExpr) -> BExpr {
        match (a, b) {
            (BExpr::True, x) | (x, BExpr::True) => x,
            (a, b) => BExpr::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn or(a: BExpr, b: BExpr) -> BExpr {
        match (a, b) {
            (BExpr::False, x) | (x, BExpr::False) => x,
            (a, b) => BExpr::Or(Box::new(a), Box::new(b)),
        }
    }

    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> BExpr {
        BExpr::Cmp(op, a, b)
    }

    pub fn subst(&self, var: &str, by: &Expr) -> BExpr {
        match self {
            BExpr::True | BExpr::False => self.clone(),
            BExpr::Cmp(op, a, b) => BExpr::Cmp(*op, a.subst(var, by), b.subst(var, by)),
            BExpr::Not(a) => BExpr::Not(Box::new(a.subst(var, by))),
            BExpr::And(a, b) => BExpr::And(Box::new(a.subst(var, by)), Box::new(b.subst(var, by))),
            BExpr::Or(a, b) => BExpr::Or(Box::new(a.subst(var, by)), Box::new(b.subst(var, by))),
            BExpr::Forall(k, lo, hi, body) => {
                let body = if k == var { (**body).clone() } else { body.subst(var, by) };
                BExpr::Forall(k.clone(), lo.subst(var, by), hi.subst(var, by), Box::new(body))
            }
        }
    }

    pub fn free_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            BExpr::True | BExpr::False => {}
            BExpr::Cmp(_, a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
            BExpr::Not(a) => a.free_vars(out),
            BExpr::And(a, b) | BExpr::Or(a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
            BExpr::Forall(k, lo, hi, body) => {
                lo.free_vars(out);
                hi.free_vars(out);
                let mut inner = BTreeSet::new();
                body.free_vars(&mut inner);
                inner.remove(k);
                out.extend(inner);
            }
        }
    }

    /// The top-level conjuncts.
    pub fn conjuncts(&self) -> Vec<&BExpr> {
        match self {
            BExpr::And(a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            BExpr::True => vec![],
            other => vec![other],
        }
    }
}

impl Guard {
    pub fn subst(&self, var: &str, by: &Expr) -> Guard {
        match self {
            Guard::Bool(b) => Guard::Bool(b.subst(var, by)),
            Guard::Const(_) => self.clone(),
        }
    }

    /// The complementary guard used for loop exits, when it is boolean.
    pub fn negated(&self) -> Option<Guard> {
        match self {
            Guard::Bool(b) => Some(Guard::Bool(BExpr::not(b.clone()))),
            Guard::Const(_) => None,
        }
    }
}

impl LValue {
    pub fn name(&self) -> &str {
        match self {
            LValue::Var(v) | LValue::Index(v, _) => v,
        }
    }
}

impl Command {
    pub fn seq(a: Command, b: Command) -> Command {
        Command::Seq(Box::new(a), Box::new(b))
    }

    pub fn choice(a: Command, b: Command) -> Command {
        Command::Choice(Box::new(a), Box::new(b))
    }

    pub fn assign(v: &str, e: Expr) -> Command {
        Command::Act(Action::Assign(LValue::Var(v.to_string()), e))
    }

    pub fn assume_bool(b: BExpr) -> Command {
        Command::Assume(Guard::Bool(b))
    }

    pub fn is_sugar_free(&self) -> bool {
        match self {
            Command::Skip | Command::Assume(_) | Command::Act(_) => true,
            Command::Seq(a, b) | Command::Choice(a, b) => a.is_sugar_free() && b.is_sugar_free(),
            Command::Iter(c, _, _) => c.is_sugar_free(),
            Command::If(..) | Command::While(..) | Command::ProbChoice(..) => false,
        }
    }

    /// Rewrites if, while and probabilistic choice into core commands.
    pub fn desugar(&self) -> Result<Command, LangError> {
        Ok(match self {
            Command::Skip | Command::Assume(_) | Command::Act(_) => self.clone(),
            Command::Seq(a, b) => Command::seq(a.desugar()?, b.desugar()?),
            Command::Choice(a, b) => Command::choice(a.desugar()?, b.desugar()?),
            Command::Iter(c, e1, e2) => Command::Iter(Box::new(c.desugar()?), e1.clone(), e2.clone()),
            Command::If(b, c1, c2) => Command::choice(
                Command::seq(Command::assume_bool(b.clone()), c1.desugar()?),
                Command::seq(Command::assume_bool(BExpr::not(b.clone())), c2.desugar()?),
            ),
            Command::While(b, c) => {
                Command::Iter(Box::new(c.desugar()?), Guard::Bool(b.clone()), Guard::Bool(BExpr::not(b.clone())))
            }
            Command::ProbChoice(p, c1, c2) => {
                let one = Rational::from_integer(1.into());
                if *p < Rational::default() || *p > one {
                    return Err(LangError::BadChoiceWeight(fmt_rational(p)));
                }
                Command::choice(
                    Command::seq(Command::Assume(Guard::Const(Weight::Rat(p.clone()))), c1.desugar()?),
                    Command::seq(Command::Assume(Guard::Const(Weight::Rat(&one - p))), c2.desugar()?),
                )
            }
        })
    }

    /// Variables read or written, excluding forall-bound names.
    pub fn free_vars(&self, out: &mut BTreeSet<String>) {
        let guard = |g: &Guard, out: &mut BTreeSet<String>| {
            if let Guard::Bool(b) = g {
                b.free_vars(out)
            }
        };
        let lval = |l: &LValue, out: &mut BTreeSet<String>| match l {
            LValue::Var(v) => {
                out.insert(v.clone());
            }
            LValue::Index(a, i) => {
                out.insert(format!("{a}[]"));
                i.free_vars(out);
            }
        };
        match self {
            Command::Skip => {}
            Command::Assume(g) => guard(g, out),
            Command::Act(Action::Assign(l, e)) => {
                lval(l, out);
                e.free_vars(out);
            }
            Command::Act(Action::NondetFlag(l)) => lval(l, out),
            Command::Seq(a, b) | Command::Choice(a, b) | Command::ProbChoice(_, a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
            Command::Iter(c, e1, e2) => {
                c.free_vars(out);
                guard(e1, out);
                guard(e2, out);
            }
            Command::If(b, c1, c2) => {
                b.free_vars(out);
                c1.free_vars(out);
                c2.free_vars(out);
            }
            Command::While(b, c) => {
                b.free_vars(out);
                c.free_vars(out);
            }
        }
    }

    /// Names assigned anywhere in the command, with indexed targets as `A[]`.
    pub fn assigned(&self, out: &mut BTreeSet<String>) {
        match self {
            Command::Act(Action::Assign(l, _) | Action::NondetFlag(l)) => {
                out.insert(match l {
                    LValue::Var(v) => v.clone(),
                    LValue::Index(a, _) => format!("{a}[]"),
                });
            }
            Command::Skip | Command::Assume(_) => {}
            Command::Seq(a, b) | Command::Choice(a, b) | Command::ProbChoice(_, a, b) | Command::If(_, a, b) => {
                a.assigned(out);
                b.assigned(out);
            }
            Command::Iter(c, _, _) | Command::While(_, c) => c.assigned(out),
        }
    }

    /// Number of nodes, used to bound generated programs.
    pub fn depth(&self) -> usize {
        match self {
            Command::Skip | Command::Assume(_) | Command::Act(_) => 1,
            Command::Seq(a, b) | Command::Choice(a, b) | Command::ProbChoice(_, a, b) | Command::If(_, a, b) => {
                1 + a.depth().max(b.depth())
            }
            Command::Iter(c, _, _) | Command::While(_, c) => 1 + c.depth(),
        }
    }
}

impl Program {
    /// The initial state binding every declared variable to zero.
    pub fn zero_state(&self) -> State {
        State::zeros(&self.vars)
    }

    pub fn core(&self) -> Result<Command, LangError> {
        self.body.desugar()
    }

    /// Declared variables plus bindings from `overrides`.
    pub fn state_with(&self, overrides: &State) -> Result<State, LangError> {
        let mut s = self.zero_state();
        for (k, v) in overrides.iter() {
            if !self.vars.contains(k) {
                return Err(LangError::UnboundVariable(k.clone()));
            }
            s.set(k, v.clone());
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desugar_if_while_choice() {
        let b = BExpr::cmp(CmpOp::Gt, Expr::var("x"), Expr::num(0));
        let c = Command::If(b.clone(), Box::new(Command::Skip), Box::new(Command::Skip));
        assert_eq!(
            c.desugar().unwrap(),
            Command::choice(
                Command::seq(Command::assume_bool(b.clone()), Command::Skip),
                Command::seq(Command::assume_bool(BExpr::not(b.clone())), Command::Skip)
            )
        );
        let w = Command::While(b.clone(), Box::new(Command::Skip));
        assert_eq!(
            w.desugar().unwrap(),
            Command::Iter(Box::new(Command::Skip), Guard::Bool(b.clone()), Guard::Bool(BExpr::not(b)))
        );
        let p = Command::ProbChoice(crate::semiring::rat(1, 3), Box::new(Command::Skip), Box::new(Command::Skip));
        let d = p.desugar().unwrap();
        let Command::Choice(l, r) = &d else { panic!() };
        assert_eq!(**l, Command::seq(Command::Assume(Guard::Const(Weight::rat(1, 3))), Command::Skip));
        assert_eq!(**r, Command::seq(Command::Assume(Guard::Const(Weight::rat(2, 3))), Command::Skip));
        assert!(d.is_sugar_free());
        assert_eq!(d.desugar().unwrap(), d);
    }

    #[test]
    fn rejects_out_of_range_choice() {
        let p = Command::ProbChoice(crate::semiring::rat(3, 2), Box::new(Command::Skip), Box::new(Command::Skip));
        assert!(p.desugar().is_err());
    }
}
