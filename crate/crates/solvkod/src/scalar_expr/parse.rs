//! Text grammar:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' ['-'] integer | '^' '(' ['-'] integer ')')?
//! primary := integer | 'i' | 'pi' | name | ('sqrt' | 'exp' | 'conj') '(' expr ')' | '(' expr ')'
//! ```

use super::raw::RawExpr;
use super::ExprError;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Op(char),
}

fn lex(s: &str) -> Result<Vec<Tok>, ExprError> {
    let cs: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let st = i;
            while i < cs.len() && cs[i].is_ascii_digit() {
                i += 1;
            }
            out.push(Tok::Num(cs[st..i].iter().collect()));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let st = i;
            while i < cs.len() && (cs[i].is_ascii_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(cs[st..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(ExprError::Parse(format!("unexpected character '{c}' in \"{s}\"")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat_op(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, c: char) -> Result<(), ExprError> {
        if self.eat_op(c) {
            Ok(())
        } else {
            Err(ExprError::Parse(format!("expected '{c}' at token {}", self.pos)))
        }
    }

    fn expr(&mut self) -> Result<RawExpr, ExprError> {
        let mut acc = self.term()?;
        loop {
            if self.eat_op('+') {
                let t = self.term()?;
                acc = match acc {
                    RawExpr::Add(mut v) => {
                        v.push(t);
                        RawExpr::Add(v)
                    }
                    a => RawExpr::Add(vec![a, t]),
                };
            } else if self.eat_op('-') {
                let t = self.term()?;
                acc = RawExpr::Sub(Box::new(acc), Box::new(t));
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<RawExpr, ExprError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat_op('*') {
                let f = self.unary()?;
                acc = match acc {
                    RawExpr::Mul(mut v) => {
                        v.push(f);
                        RawExpr::Mul(v)
                    }
                    a => RawExpr::Mul(vec![a, f]),
                };
            } else if self.eat_op('/') {
                let f = self.unary()?;
                acc = RawExpr::Div(Box::new(acc), Box::new(f));
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<RawExpr, ExprError> {
        if self.eat_op('-') {
            Ok(RawExpr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn exponent(&mut self) -> Result<i64, ExprError> {
        let paren = self.eat_op('(');
        let neg = self.eat_op('-');
        let n = match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                n.parse::<i64>().map_err(|_| ExprError::Parse(format!("exponent {n} too large")))?
            }
            _ => return Err(ExprError::Parse("expected integer exponent".into())),
        };
        if paren {
            self.expect_op(')')?;
        }
        Ok(if neg { -n } else { n })
    }

    fn power(&mut self) -> Result<RawExpr, ExprError> {
        let base = self.primary()?;
        if self.eat_op('^') {
            let n = self.exponent()?;
            Ok(RawExpr::Pow(Box::new(base), n))
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<RawExpr, ExprError> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(RawExpr::Int(n))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            Some(Tok::Ident(id)) => {
                self.pos += 1;
                match id.as_str() {
                    "i" => Ok(RawExpr::I),
                    "pi" => Ok(RawExpr::Pi),
                    "sqrt" | "exp" | "conj" => {
                        self.expect_op('(')?;
                        let e = Box::new(self.expr()?);
                        self.expect_op(')')?;
                        Ok(match id.as_str() {
                            "sqrt" => RawExpr::Sqrt(e),
                            "exp" => RawExpr::Exp(e),
                            _ => RawExpr::Conj(e),
                        })
                    }
                    _ => Ok(RawExpr::Sym(id)),
                }
            }
            other => Err(ExprError::Parse(format!("unexpected token {other:?}"))),
        }
    }
}

/// Parses the text grammar into a raw tree.
pub fn parse(s: &str) -> Result<RawExpr, ExprError> {
    let toks = lex(s)?;
    if toks.is_empty() {
        return Err(ExprError::Parse("empty expression".into()));
    }
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(ExprError::Parse(format!("trailing input in \"{s}\"")));
    }
    Ok(e)
}
