use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use super::{Action, BExpr, CmpOp, Command, Expr, Guard, LValue, LangError, Program};
use crate::semiring::{Rational, Weight};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Num(Rational),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(q) => write!(f, "`{}`", crate::semiring::fmt_rational(q)),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const SYMBOLS: &[&str] = &[
    ":=", "..", "/\\", "\\/", "=>", "!=", "<=", ">=", "++", "+", "-", "*", "^", "(", ")", "[", "]", "=", "<", ">", "~",
    ",", ".", ";", ":", "{", "}",
];

const KEYWORDS: &[&str] = &[
    "skip",
    "assume",
    "if",
    "then",
    "else",
    "while",
    "do",
    "iter",
    "vars",
    "tru",
    "fls",
    "true",
    "false",
    "forall",
    "in",
    "nondet_flag",
    "inf",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for k in 0..n {
            if chars[*i + k] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        }
        *i += n;
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        let (tl, tc) = (line, col);
        if c.is_ascii_digit() {
            let start = i;
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            // A fraction `p/q` or a decimal `p.q`.
            if j + 1 < chars.len() && matches!(chars[j], '/' | '.') && chars[j + 1].is_ascii_digit() {
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
            }
            let text: String = chars[start..j].iter().collect();
            let q = crate::semiring::parse_rational(&text).ok_or(ParseError {
                line: tl,
                col: tc,
                msg: format!("bad number `{text}`"),
            })?;
            advance(&mut i, &mut line, &mut col, j - start);
            out.push(Token { tok: Tok::Num(q), line: tl, col: tc });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            let mut j = i;
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let text: String = chars[start..j].iter().collect();
            advance(&mut i, &mut line, &mut col, j - start);
            out.push(Token { tok: Tok::Ident(text), line: tl, col: tc });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                advance(&mut i, &mut line, &mut col, s.chars().count());
                out.push(Token { tok: Tok::Sym(s), line: tl, col: tc });
            }
            None => {
                return Err(ParseError { line: tl, col: tc, msg: format!("unexpected character `{c}`") });
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

/// Recursive-descent parser shared by the program and assertion grammars.
pub struct Parser {
    toks: Vec<Token>,
    pub pos: usize,
    reserved: Vec<&'static str>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    pub fn new(src: &str) -> PResult<Parser> {
        Ok(Parser { toks: tokenize(src)?, pos: 0, reserved: KEYWORDS.to_vec() })
    }

    /// Adds keywords that may not be used as variable names.
    pub fn reserve(&mut self, kws: &[&'static str]) {
        self.reserved.extend_from_slice(kws);
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    pub fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let t = &self.toks[self.pos];
        Err(ParseError { line: t.line, col: t.col, msg: msg.into() })
    }

    pub fn at_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    pub fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    pub fn eat_sym(&mut self, s: &str) -> bool {
        if self.at_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(format!("expected `{s}`, found {}", self.peek()))
        }
    }

    pub fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.error(format!("expected `{kw}`, found {}", self.peek()))
        }
    }

    pub fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    pub fn expect_eof(&mut self) -> PResult<()> {
        if self.at_eof() {
            Ok(())
        } else {
            self.error(format!("unexpected {}", self.peek()))
        }
    }

    pub fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !self.reserved.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            t => self.error(format!("expected identifier, found {t}")),
        }
    }

    fn is_var_token(&self, k: usize) -> bool {
        matches!(self.peek_at(k), Tok::Ident(s) if !self.reserved.contains(&s.as_str()))
    }

    /// Whether a command starts `k` tokens ahead.
    fn command_starts_at(&self, k: usize) -> bool {
        match self.peek_at(k) {
            Tok::Ident(s) if ["skip", "assume", "if", "while", "iter"].contains(&s.as_str()) => true,
            Tok::Ident(_) if self.is_var_token(k) => match self.peek_at(k + 1) {
                Tok::Sym(":=") => true,
                Tok::Sym("[") => {
                    let mut depth = 0usize;
                    let mut j = k + 1;
                    loop {
                        match self.peek_at(j) {
                            Tok::Sym("[") => depth += 1,
                            Tok::Sym("]") => {
                                depth -= 1;
                                if depth == 0 {
                                    return *self.peek_at(j + 1) == Tok::Sym(":=");
                                }
                            }
                            Tok::Eof => return false,
                            _ => {}
                        }
                        j += 1;
                    }
                }
                _ => false,
            },
            Tok::Sym("(") => self.command_starts_at(k + 1),
            _ => false,
        }
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.at_sym("+") {
                if *self.peek_at(1) == Tok::Sym("[") || self.command_starts_at(1) {
                    break;
                }
                self.bump();
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_sym("-") {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                break;
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while self.eat_sym("*") {
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat_sym("-") {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.primary()?;
        if self.eat_sym("^") {
            return Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Num(q) => {
                self.bump();
                Ok(Expr::Num(q))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(_) if self.is_var_token(0) => {
                let v = self.ident()?;
                if self.at_sym("[") {
                    self.bump();
                    let i = self.expr()?;
                    self.expect_sym("]")?;
                    Ok(Expr::Index(v, Box::new(i)))
                } else {
                    Ok(Expr::Var(v))
                }
            }
            t => self.error(format!("expected expression, found {t}")),
        }
    }

    fn cmp_op(&mut self) -> Option<CmpOp> {
        let op = match self.peek() {
            Tok::Sym("=") => CmpOp::Eq,
            Tok::Sym("!=") => CmpOp::Ne,
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym(">=") => CmpOp::Ge,
            _ => return None,
        };
        self.bump();
        Some(op)
    }

    /// A connective whose right operand does not parse is left for the
    /// caller, so predicates can sit inside larger formulas.
    pub fn bexpr(&mut self) -> PResult<BExpr> {
        let mut lhs = self.bconj()?;
        while let Some(rhs) = self.operand_after("\\/", Self::bconj) {
            lhs = BExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn bconj(&mut self) -> PResult<BExpr> {
        let mut lhs = self.bnot()?;
        while let Some(rhs) = self.operand_after("/\\", Self::bnot) {
            lhs = BExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn operand_after(&mut self, op: &str, operand: fn(&mut Self) -> PResult<BExpr>) -> Option<BExpr> {
        let save = self.pos;
        if !self.eat_sym(op) {
            return None;
        }
        match operand(self) {
            Ok(b) => Some(b),
            Err(_) => {
                self.pos = save;
                None
            }
        }
    }

    fn bnot(&mut self) -> PResult<BExpr> {
        if self.eat_sym("~") {
            return Ok(BExpr::Not(Box::new(self.bnot()?)));
        }
        self.batom()
    }

    fn batom(&mut self) -> PResult<BExpr> {
        if self.eat_kw("tru") || self.eat_kw("true") {
            return Ok(BExpr::True);
        }
        if self.eat_kw("fls") || self.eat_kw("false") {
            return Ok(BExpr::False);
        }
        if self.eat_kw("forall") {
            let k = self.ident()?;
            self.expect_kw("in")?;
            let lo = self.expr()?;
            self.expect_sym("..")?;
            let hi = self.expr()?;
            self.expect_sym(".")?;
            let body = self.bexpr()?;
            return Ok(BExpr::Forall(k, lo, hi, Box::new(body)));
        }
        if self.at_sym("(") {
            let save = self.pos;
            self.bump();
            if let Ok(b) = self.bexpr() {
                if self.eat_sym(")") && !self.at_arith_continuation() {
                    return Ok(b);
                }
            }
            self.pos = save;
        }
        let lhs = self.expr()?;
        match self.cmp_op() {
            Some(op) => Ok(BExpr::Cmp(op, lhs, self.expr()?)),
            None => self.error(format!("expected comparison, found {}", self.peek())),
        }
    }

    fn at_arith_continuation(&self) -> bool {
        matches!(self.peek(), Tok::Sym("=" | "!=" | "<" | "<=" | ">" | ">=" | "*" | "^" | "-"))
            || (self.at_sym("+") && !self.command_starts_at(1) && *self.peek_at(1) != Tok::Sym("["))
    }

    /// A closed arithmetic expression evaluated to a rational.
    pub fn constant(&mut self) -> PResult<Rational> {
        let e = self.expr()?;
        if !super::is_closed(&e) {
            return self.error("expected a constant");
        }
        super::eval_expr(&e, &super::State::new()).or_else(|err| self.error(err.to_string()))
    }

    pub fn guard(&mut self) -> PResult<Guard> {
        if self.eat_kw("inf") {
            return Ok(Guard::Const(Weight::Inf));
        }
        let save = self.pos;
        if let Ok(b) = self.bexpr() {
            return Ok(Guard::Bool(b));
        }
        self.pos = save;
        Ok(Guard::Const(Weight::Rat(self.constant()?)))
    }

    pub fn command(&mut self) -> PResult<Command> {
        let mut lhs = self.choice()?;
        while self.at_sym(";") {
            self.bump();
            if self.at_sym(")") || self.at_eof() {
                break;
            }
            lhs = Command::seq(lhs, self.choice()?);
        }
        Ok(lhs)
    }

    fn choice(&mut self) -> PResult<Command> {
        let mut lhs = self.unit()?;
        loop {
            if self.at_sym("+") && *self.peek_at(1) == Tok::Sym("[") {
                self.bump();
                self.bump();
                let p = self.constant()?;
                self.expect_sym("]")?;
                lhs = Command::ProbChoice(p, Box::new(lhs), Box::new(self.unit()?));
            } else if self.eat_sym("+") {
                lhs = Command::choice(lhs, self.unit()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unit(&mut self) -> PResult<Command> {
        if self.eat_kw("skip") {
            return Ok(Command::Skip);
        }
        if self.eat_kw("assume") {
            return Ok(Command::Assume(self.guard()?));
        }
        if self.eat_kw("if") {
            let b = self.bexpr()?;
            self.expect_kw("then")?;
            let c1 = self.choice()?;
            self.expect_kw("else")?;
            let c2 = self.choice()?;
            return Ok(Command::If(b, Box::new(c1), Box::new(c2)));
        }
        if self.eat_kw("while") {
            let b = self.bexpr()?;
            self.expect_kw("do")?;
            return Ok(Command::While(b, Box::new(self.choice()?)));
        }
        if self.eat_kw("iter") {
            let body = self.unit()?;
            self.expect_sym("[")?;
            let e1 = self.guard()?;
            self.expect_sym("]")?;
            self.expect_sym("[")?;
            let e2 = self.guard()?;
            self.expect_sym("]")?;
            return Ok(Command::Iter(Box::new(body), e1, e2));
        }
        if self.eat_sym("(") {
            let c = self.command()?;
            self.expect_sym(")")?;
            return Ok(c);
        }
        if self.is_var_token(0) {
            let v = self.ident()?;
            let lv = if self.eat_sym("[") {
                let i = self.expr()?;
                self.expect_sym("]")?;
                LValue::Index(v, i)
            } else {
                LValue::Var(v)
            };
            self.expect_sym(":=")?;
            if self.eat_kw("nondet_flag") {
                return Ok(Command::Act(Action::NondetFlag(lv)));
            }
            return Ok(Command::Act(Action::Assign(lv, self.expr()?)));
        }
        self.error(format!("expected command, found {}", self.peek()))
    }

    fn vars_header(&mut self) -> PResult<Option<Vec<String>>> {
        if !self.eat_kw("vars") {
            return Ok(None);
        }
        let mut vs = vec![self.ident()?];
        while self.eat_sym(",") {
            vs.push(self.ident()?);
        }
        Ok(Some(vs))
    }
}

/// Checks that every variable the program mentions is declared.
fn check_bound(body: &Command, vars: &[String]) -> Result<(), LangError> {
    let mut used = BTreeSet::new();
    body.free_vars(&mut used);
    for u in used {
        let ok = match u.strip_suffix("[]") {
            Some(base) => vars.iter().any(|v| {
                v.strip_prefix(base).is_some_and(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
            }),
            None => vars.contains(&u),
        };
        if !ok {
            return Err(LangError::UnboundVariable(u));
        }
    }
    Ok(())
}

/// Parses a program, with an optional `vars x, y` header. Without a header
/// the declared variables are those the program mentions.
pub fn parse_program(src: &str) -> Result<Program, LangError> {
    let mut p = Parser::new(src)?;
    let header = p.vars_header()?;
    let body = p.command()?;
    p.expect_eof()?;
    let vars = match header {
        Some(vs) => vs,
        None => {
            let mut used = BTreeSet::new();
            body.free_vars(&mut used);
            if let Some(a) = used.iter().find(|u| u.ends_with("[]")) {
                return Err(LangError::Eval(format!("array `{a}` needs a `vars` header")));
            }
            used.into_iter().collect()
        }
    };
    check_bound(&body, &vars)?;
    Ok(Program { vars, body })
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

pub fn parse_bexpr(src: &str) -> Result<BExpr, ParseError> {
    let mut p = Parser::new(src)?;
    let b = p.bexpr()?;
    p.expect_eof()?;
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semiring::rat;

    #[test]
    fn parses_basic_forms() {
        assert_eq!(parse_program("skip").unwrap().body, Command::Skip);
        let p = parse_program("x := 0 ; while x < 2 do x := x + 1").unwrap();
        match p.body {
            Command::Seq(a, b) => {
                assert!(matches!(*a, Command::Act(Action::Assign(..))));
                assert!(matches!(*b, Command::While(..)));
            }
            other => panic!("{other:?}"),
        }
        let p = parse_program("vars h, k\n(h := h+1) +[1/2] (h := h+1+2^(-k))").unwrap();
        assert!(matches!(p.body, Command::ProbChoice(ref q, _, _) if *q == rat(1, 2)));
    }

    #[test]
    fn guards_and_choice() {
        let p = parse_program("vars x\nassume 1/2 ; x := 1 + x := 2").unwrap();
        let Command::Seq(a, b) = p.body else { panic!() };
        assert_eq!(*a, Command::Assume(Guard::Const(Weight::rat(1, 2))));
        assert!(matches!(*b, Command::Choice(..)));
        let p = parse_program("vars x\nassume x > 0 + skip").unwrap();
        assert!(matches!(p.body, Command::Choice(..)));
        let p = parse_program("vars x\niter (x := x + 1) [1/2][1/2]").unwrap();
        assert!(matches!(p.body, Command::Iter(..)));
    }

    #[test]
    fn parenthesized_tests() {
        let b = parse_bexpr("(x + 1) > 2 /\\ (y = 1 \\/ tru)").unwrap();
        assert!(matches!(b, BExpr::And(..)));
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_program("vars x\nx := := 1").unwrap_err();
        let LangError::Syntax(pe) = e else { panic!("{e:?}") };
        assert_eq!((pe.line, pe.col), (2, 6));
        assert!(matches!(parse_program("vars x\ny := 1"), Err(LangError::UnboundVariable(v)) if v == "y"));
    }

    #[test]
    fn arrays_need_declared_cells() {
        assert!(parse_program("vars A0, A1, i\nA[i] := A[i+1]").is_ok());
        assert!(parse_program("vars B0, i\nA[i] := 0").is_err());
    }
}
