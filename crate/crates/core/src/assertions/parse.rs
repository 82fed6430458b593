use num_traits::ToPrimitive;

use super::{limits::Schema, Assertion, AssertionError, WExpr};
use crate::lang::{ParseError, Parser, State, Tok};
use crate::weighting::Outcome;

const ASSERTION_KEYWORDS: &[&str] = &[
    "TOP",
    "BOT",
    "DIV",
    "box",
    "dia",
    "boxT",
    "diaP",
    "exists",
    "oplus",
    "one",
    "nat",
    "weight",
    "supp_in",
    "supp_in_div",
    "supp_meets",
    "supp_meets_div",
    "family",
    "case",
    "default",
    "limit",
];

type PResult<T> = Result<T, ParseError>;

struct AParser {
    p: Parser,
    weight_vars: Vec<String>,
}

impl AParser {
    fn new(src: &str) -> PResult<AParser> {
        let mut p = Parser::new(src)?;
        p.reserve(ASSERTION_KEYWORDS);
        Ok(AParser { p, weight_vars: Vec::new() })
    }

    fn assertion(&mut self) -> PResult<Assertion> {
        let lhs = self.disj()?;
        if self.p.eat_sym("=>") {
            return Ok(Assertion::Implies(Box::new(lhs), Box::new(self.assertion()?)));
        }
        Ok(lhs)
    }

    fn disj(&mut self) -> PResult<Assertion> {
        let mut lhs = self.conj()?;
        while self.p.eat_sym("\\/") {
            lhs = Assertion::or(lhs, self.conj()?);
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> PResult<Assertion> {
        let mut lhs = self.oplus()?;
        while self.p.eat_sym("/\\") {
            lhs = Assertion::and(lhs, self.oplus()?);
        }
        Ok(lhs)
    }

    fn oplus(&mut self) -> PResult<Assertion> {
        let first = self.unary()?;
        if !self.p.at_sym("++") {
            return Ok(first);
        }
        let mut parts = vec![first];
        while self.p.eat_sym("++") {
            parts.push(self.unary()?);
        }
        Ok(Assertion::OPlus(parts))
    }

    fn int(&mut self) -> PResult<i64> {
        let q = self.p.constant()?;
        match q.is_integer().then(|| q.to_integer().to_i64()).flatten() {
            Some(v) => Ok(v),
            None => self.p.error("expected an integer"),
        }
    }

    fn unary(&mut self) -> PResult<Assertion> {
        let p = &mut self.p;
        if p.eat_sym("~") {
            return Ok(Assertion::not(self.unary()?));
        }
        for (kw, div_form) in [("box", Some(Assertion::AlwaysDiv)), ("dia", Some(Assertion::SometimesDiv))] {
            if self.p.at_kw(kw) && matches!(self.p.peek_at(1), Tok::Ident(s) if s == "DIV") {
                self.p.bump();
                self.p.bump();
                return Ok(div_form.expect("modal form"));
            }
        }
        let modal: [(&str, fn(crate::lang::BExpr) -> Assertion); 8] = [
            ("box", Assertion::Box),
            ("dia", Assertion::Dia),
            ("boxT", Assertion::BoxT),
            ("diaP", Assertion::DiaP),
            ("supp_in", |b| Assertion::SuppIn(b, false)),
            ("supp_in_div", |b| Assertion::SuppIn(b, true)),
            ("supp_meets", |b| Assertion::SuppMeets(b, false)),
            ("supp_meets_div", |b| Assertion::SuppMeets(b, true)),
        ];
        for (kw, make) in modal {
            if self.p.eat_kw(kw) {
                return Ok(make(self.p.bexpr()?));
            }
        }
        if self.p.at_kw("exists") {
            return self.exists();
        }
        if self.p.eat_kw("oplus") {
            let k = self.p.ident()?;
            self.p.expect_sym(">=")?;
            let lo = self.int()?;
            self.p.expect_sym(".")?;
            return Ok(Assertion::OPlusAll(k, lo, Box::new(self.assertion()?)));
        }
        if self.p.at_sym("[") {
            let save = self.p.pos;
            self.p.bump();
            if let Ok(u) = self.weight() {
                if self.p.eat_sym("]") && self.p.eat_sym("*") {
                    return Ok(Assertion::ScaleL(u, Box::new(self.unary()?)));
                }
            }
            self.p.pos = save;
        }
        self.postfix()
    }

    fn exists(&mut self) -> PResult<Assertion> {
        self.p.expect_kw("exists")?;
        let mut vars = vec![self.p.ident()?];
        while self.p.eat_sym(",") {
            vars.push(self.p.ident()?);
        }
        if vars.len() == 1 && self.p.eat_kw("in") {
            let lo = self.int()?;
            self.p.expect_sym("..")?;
            let hi = self.int()?;
            self.p.expect_sym(".")?;
            let body = self.assertion()?;
            return Ok(Assertion::ExistsFin(vars.remove(0), lo, hi, Box::new(body)));
        }
        self.p.expect_sym(":")?;
        if vars.len() == 1 && self.p.eat_kw("nat") {
            self.p.expect_sym(".")?;
            let body = self.assertion()?;
            return Ok(Assertion::ExistsNat(vars.remove(0), Box::new(body)));
        }
        self.p.expect_kw("weight")?;
        let nonzero = if self.p.eat_sym("!=") {
            let z = self.p.constant()?;
            if z != Default::default() {
                return self.p.error("expected `!= 0`");
            }
            true
        } else {
            false
        };
        self.p.expect_sym(".")?;
        let depth = self.weight_vars.len();
        self.weight_vars.extend(vars.iter().cloned());
        let body = self.assertion();
        self.weight_vars.truncate(depth);
        Ok(Assertion::ExistsWeight { vars, nonzero, body: Box::new(body?) })
    }

    fn postfix(&mut self) -> PResult<Assertion> {
        let mut a = self.primary()?;
        while self.p.at_sym("*") && *self.p.peek_at(1) == Tok::Sym("[") {
            self.p.bump();
            self.p.bump();
            let u = self.weight()?;
            self.p.expect_sym("]")?;
            a = Assertion::ScaleR(Box::new(a), u);
        }
        Ok(a)
    }

    fn weight(&mut self) -> PResult<WExpr> {
        if self.p.eat_kw("inf") {
            return Ok(WExpr::Inf);
        }
        if let Tok::Ident(v) = self.p.peek().clone() {
            if self.weight_vars.contains(&v) && matches!(self.p.peek_at(1), Tok::Sym(")" | "]")) {
                self.p.bump();
                return Ok(WExpr::Var(v));
            }
        }
        Ok(WExpr::Num(self.p.expr()?))
    }

    fn weight_suffix(&mut self) -> PResult<WExpr> {
        if self.p.eat_sym("^") {
            self.p.expect_sym("(")?;
            let u = self.weight()?;
            self.p.expect_sym(")")?;
            Ok(u)
        } else {
            Ok(WExpr::one())
        }
    }

    fn primary(&mut self) -> PResult<Assertion> {
        if self.p.eat_kw("TOP") {
            return Ok(Assertion::Top);
        }
        if self.p.eat_kw("BOT") {
            return Ok(Assertion::Bot);
        }
        if self.p.eat_kw("DIV") {
            return Ok(Assertion::Div(self.weight_suffix()?));
        }
        if self.p.eat_kw("one") {
            return self.singleton();
        }
        if self.p.at_sym("(") {
            let save = self.p.pos;
            self.p.bump();
            if let Ok(b) = self.p.bexpr() {
                if self.p.eat_sym(")") {
                    let u = self.weight_suffix()?;
                    return Ok(Assertion::Atom(b, u));
                }
            }
            self.p.pos = save;
            if let Ok(b) = self.p.bexpr() {
                return Ok(Assertion::atom(b));
            }
            self.p.pos = save;
            self.p.bump();
            let a = self.assertion()?;
            self.p.expect_sym(")")?;
            return Ok(a);
        }
        let b = self.p.bexpr()?;
        if self.p.at_sym("^") {
            return self.p.error("parenthesize a weighted predicate: `(P)^(u)`");
        }
        Ok(Assertion::atom(b))
    }

    fn singleton(&mut self) -> PResult<Assertion> {
        self.p.expect_sym("{")?;
        let mut entries = Vec::new();
        while !self.p.eat_sym("}") {
            if !entries.is_empty() {
                self.p.expect_sym(",")?;
            }
            let outcome = if self.p.eat_kw("DIV") {
                Outcome::Div
            } else {
                self.p.expect_sym("(")?;
                let mut s = State::new();
                while !self.p.eat_sym(")") {
                    if !s.vars().next().is_none() {
                        self.p.expect_sym(",")?;
                    }
                    let v = self.p.ident()?;
                    self.p.expect_sym("=")?;
                    let q = self.p.constant()?;
                    s.set(&v, q);
                }
                Outcome::State(s)
            };
            self.p.expect_sym(":")?;
            entries.push((outcome, self.weight()?));
        }
        Ok(Assertion::Singleton(entries))
    }
}

fn to_err(e: ParseError) -> AssertionError {
    AssertionError::Parse(e.to_string())
}

pub fn parse_assertion(src: &str) -> Result<Assertion, AssertionError> {
    let mut ap = AParser::new(src).map_err(to_err)?;
    let a = ap.assertion().map_err(to_err)?;
    ap.p.expect_eof().map_err(to_err)?;
    Ok(a)
}

/// Parses `family n: case 0: A; case 1: B; C; limit: L`. The clause
/// without `case` covers every other index and may be written `default: C`.
pub fn parse_schema(src: &str) -> Result<Schema, AssertionError> {
    let mut ap = AParser::new(src).map_err(to_err)?;
    let r: PResult<Schema> = (|| {
        ap.p.expect_kw("family")?;
        let index = ap.p.ident()?;
        ap.p.expect_sym(":")?;
        let mut cases = std::collections::BTreeMap::new();
        let mut default = None;
        let mut limit = None;
        loop {
            if ap.p.eat_kw("case") {
                let k = ap.int()?;
                if k < 0 {
                    return ap.p.error("case indices are natural numbers");
                }
                ap.p.expect_sym(":")?;
                cases.insert(k as u64, ap.assertion()?);
            } else if ap.p.eat_kw("limit") {
                ap.p.expect_sym(":")?;
                limit = Some(ap.assertion()?);
            } else {
                if ap.p.eat_kw("default") {
                    ap.p.expect_sym(":")?;
                }
                if default.is_some() {
                    return ap.p.error("a family has one default clause");
                }
                default = Some(ap.assertion()?);
            }
            if !ap.p.eat_sym(";") {
                break;
            }
        }
        ap.p.expect_eof()?;
        match default {
            Some(d) => Ok(Schema { index, cases, default: d, limit }),
            None => ap.p.error("a family needs a default clause"),
        }
    })();
    r.map_err(to_err)
}
