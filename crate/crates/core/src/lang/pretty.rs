use std::fmt;

use super::{Action, BExpr, CmpOp, Command, Expr, Guard, LValue, Program};
use crate::semiring::{fmt_rational, Weight};

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        Expr::Num(q) if !q.is_integer() || q < &Default::default() => 4,
        _ => 5,
    }
}

fn wrap(e: &Expr, min: u8) -> String {
    if prec(e) < min {
        format!("({e})")
    } else {
        e.to_string()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(q) => write!(f, "{}", fmt_rational(q)),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Index(a, i) => write!(f, "{a}[{i}]"),
            Expr::Neg(a) => write!(f, "-{}", wrap(a, 4)),
            Expr::Add(a, b) => write!(f, "{} + {}", wrap(a, 1), wrap(b, 2)),
            Expr::Sub(a, b) => write!(f, "{} - {}", wrap(a, 1), wrap(b, 2)),
            Expr::Mul(a, b) => write!(f, "{} * {}", wrap(a, 2), wrap(b, 3)),
            Expr::Pow(a, b) => write!(f, "{}^{}", wrap(a, 5), wrap(b, 5)),
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        })
    }
}

fn bwrap(b: &BExpr) -> String {
    match b {
        BExpr::And(..) | BExpr::Or(..) | BExpr::Forall(..) => format!("({b})"),
        _ => b.to_string(),
    }
}

impl fmt::Display for BExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BExpr::True => write!(f, "tru"),
            BExpr::False => write!(f, "fls"),
            BExpr::Cmp(op, a, b) => write!(f, "{a} {op} {b}"),
            BExpr::Not(a) => write!(f, "~{}", bwrap(a)),
            BExpr::And(a, b) => {
                let l = if matches!(**a, BExpr::And(..)) { a.to_string() } else { bwrap(a) };
                write!(f, "{l} /\\ {}", bwrap(b))
            }
            BExpr::Or(a, b) => {
                let l = if matches!(**a, BExpr::Or(..)) { a.to_string() } else { bwrap(a) };
                write!(f, "{l} \\/ {}", bwrap(b))
            }
            BExpr::Forall(k, lo, hi, body) => write!(f, "forall {k} in {lo}..{hi}. {body}"),
        }
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Guard::Bool(b) => write!(f, "{b}"),
            Guard::Const(Weight::Rat(q)) => write!(f, "{}", fmt_rational(q)),
            Guard::Const(w) => write!(f, "{w}"),
        }
    }
}

impl fmt::Display for LValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LValue::Var(v) => write!(f, "{v}"),
            LValue::Index(a, i) => write!(f, "{a}[{i}]"),
        }
    }
}

fn atom(c: &Command) -> String {
    match c {
        Command::Skip | Command::Assume(_) | Command::Act(_) | Command::Iter(..) => c.to_string(),
        _ => format!("({c})"),
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Skip => write!(f, "skip"),
            Command::Assume(g) => write!(f, "assume {}", g),
            Command::Act(Action::Assign(l, e)) => write!(f, "{l} := {e}"),
            Command::Act(Action::NondetFlag(l)) => write!(f, "{l} := nondet_flag"),
            Command::Seq(a, b) => {
                let l = if matches!(**a, Command::Seq(..)) { a.to_string() } else { atom(a) };
                write!(f, "{l}; {}", atom(b))
            }
            Command::Choice(a, b) => {
                let l = if matches!(**a, Command::Choice(..)) { a.to_string() } else { atom(a) };
                write!(f, "{l} + {}", atom(b))
            }
            Command::ProbChoice(p, a, b) => write!(f, "{} +[{}] {}", atom(a), fmt_rational(p), atom(b)),
            // A trailing expression would swallow the guard bracket as an index.
            Command::Iter(c, e1, e2) if matches!(**c, Command::Skip | Command::Iter(..)) => {
                write!(f, "iter {c} [{e1}][{e2}]")
            }
            Command::Iter(c, e1, e2) => write!(f, "iter ({c}) [{e1}][{e2}]"),
            Command::If(b, c1, c2) => write!(f, "if {b} then {} else {}", atom(c1), atom(c2)),
            Command::While(b, c) => write!(f, "while {b} do {}", atom(c)),
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.vars.is_empty() {
            writeln!(f, "vars {}", self.vars.join(", "))?;
        }
        write!(f, "{}", self.body)
    }
}

#[cfg(test)]
mod tests {
    use crate::lang::parse_program;

    #[test]
    fn round_trips() {
        for src in [
            "vars x\nx := 0; iter (x := x + 1) [1/2][1/2]",
            "vars x, y\nx := 1; y := 2; while x + y > 1 do (x := 3 - x; y := 3 - y)",
            "vars t, h, k\nwhile h < t do (t := t + 1; (h := h + 1) +[1/2] (h := h + 1 + 2^(-k)); k := k + 1)",
            "vars p\nwhile p = 0 do p := nondet_flag",
            "vars x\n(assume x > 0; x := x - 1) + (assume ~(x > 0 /\\ x < 3) + skip)",
            "vars A0, A1, i, j, t\nif A[i] <= 2 then i := i + 1 else if A[j] >= 2 then j := j - 1 else (t := A[i]; A[i] := A[j]; A[j] := t)",
            "vars x\nassume -1/2 * x + 3 >= x^2 - (x - 1)",
        ] {
            let p = parse_program(src).unwrap();
            let printed = p.to_string();
            let q = parse_program(&printed).unwrap();
            assert_eq!(p, q, "{printed}");
            let core = p.core().unwrap();
            let reparsed = parse_program(&format!("vars {}\n{}", p.vars.join(", "), core)).unwrap();
            assert_eq!(reparsed.body, core);
        }
    }
}
