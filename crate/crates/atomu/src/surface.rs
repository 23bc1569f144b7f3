//! Name-level constraint syntax and the shared lexer for the text DSLs.
//!
//! Surface constraints mention atom variables and context constants by
//! name; they are compiled down to kernel [`Constraint`]s once the ambient
//! variable list and context are known.

use crate::atoms::{AtomError, Constraint, Context, CTerm, Rel};
use std::collections::BTreeMap;
use std::fmt;

/// Quantifier-free constraint with named terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SConstraint {
    Bool(bool),
    Cmp(String, Rel, String),
    Not(Box<SConstraint>),
    And(Vec<SConstraint>),
    Or(Vec<SConstraint>),
}

impl SConstraint {
    pub fn tt() -> SConstraint {
        SConstraint::Bool(true)
    }

    pub fn and(cs: Vec<SConstraint>) -> SConstraint {
        match cs.len() {
            0 => SConstraint::Bool(true),
            1 => cs.into_iter().next().unwrap(),
            _ => SConstraint::And(cs),
        }
    }

    pub fn or(cs: Vec<SConstraint>) -> SConstraint {
        match cs.len() {
            0 => SConstraint::Bool(false),
            1 => cs.into_iter().next().unwrap(),
            _ => SConstraint::Or(cs),
        }
    }

    pub fn cmp(l: &str, r: Rel, t: &str) -> SConstraint {
        SConstraint::Cmp(l.to_string(), r, t.to_string())
    }

    /// All names mentioned.
    pub fn names(&self, out: &mut Vec<String>) {
        match self {
            SConstraint::Bool(_) => {}
            SConstraint::Cmp(l, _, r) => {
                out.push(l.clone());
                out.push(r.clone());
            }
            SConstraint::Not(c) => c.names(out),
            SConstraint::And(cs) | SConstraint::Or(cs) => cs.iter().for_each(|c| c.names(out)),
        }
    }

    pub fn uses_order(&self) -> bool {
        match self {
            SConstraint::Bool(_) => false,
            SConstraint::Cmp(_, r, _) => r.needs_order(),
            SConstraint::Not(c) => c.uses_order(),
            SConstraint::And(cs) | SConstraint::Or(cs) => cs.iter().any(|c| c.uses_order()),
        }
    }

    /// Compiles to a kernel constraint: names in `locals` become variables
    /// (by position), all others resolve through `resolve`.
    pub fn compile(
        &self,
        locals: &[String],
        resolve: &dyn Fn(&str) -> Option<u32>,
    ) -> Result<Constraint, AtomError> {
        let term = |n: &str| -> Result<CTerm, AtomError> {
            if let Some(i) = locals.iter().position(|l| l == n) {
                Ok(CTerm::Var(i as u32))
            } else if let Some(c) = resolve(n) {
                Ok(CTerm::Const(c))
            } else {
                Err(AtomError::UnknownName(n.to_string()))
            }
        };
        Ok(match self {
            SConstraint::Bool(b) => Constraint::Bool(*b),
            SConstraint::Cmp(l, r, t) => Constraint::Cmp(term(l)?, *r, term(t)?),
            SConstraint::Not(c) => Constraint::Not(Box::new(c.compile(locals, resolve)?)),
            SConstraint::And(cs) => Constraint::And(
                cs.iter()
                    .map(|c| c.compile(locals, resolve))
                    .collect::<Result<_, _>>()?,
            ),
            SConstraint::Or(cs) => Constraint::Or(
                cs.iter()
                    .map(|c| c.compile(locals, resolve))
                    .collect::<Result<_, _>>()?,
            ),
        })
    }
}

impl fmt::Display for SConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SConstraint::Bool(b) => write!(f, "{b}"),
            SConstraint::Cmp(l, r, t) => write!(f, "{l} {} {t}", r.symbol()),
            SConstraint::Not(c) => write!(f, "not ({c})"),
            SConstraint::And(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " and ")?;
                    }
                    match c {
                        SConstraint::Or(_) => write!(f, "({c})")?,
                        _ => write!(f, "{c}")?,
                    }
                }
                Ok(())
            }
            SConstraint::Or(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " or ")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
        }
    }
}

/// Resolves free names against a scope of binder aliases and the context.
pub fn scope_resolver<'a>(
    scope: &'a BTreeMap<String, u32>,
    ctx: &'a Context,
) -> impl Fn(&str) -> Option<u32> + 'a {
    move |n: &str| scope.get(n).copied().or_else(|| ctx.const_id(n))
}

/// Parse error with position information.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Number(i64, i64),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(n, d) if *d == 1 => write!(f, "`{n}`"),
            Tok::Number(n, d) => write!(f, "`{n}/{d}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

/// Hand-rolled lexer shared by the model, formula, game and machine DSLs.
/// `#` starts a comment running to end of line.
#[derive(Debug)]
pub struct Lexer {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

const SYMBOLS: &[&str] = &[
    "->", "<=", ">=", "!=", ":=", "/\\", "\\/", "<>", "[]", "(", ")", "{", "}", ",", ";", ":",
    ".", "~", "<", ">", "=", "-",
];

impl Lexer {
    pub fn new(src: &str) -> Result<Lexer, ParseError> {
        let mut toks = Vec::new();
        let mut line = 1usize;
        let mut col = 1usize;
        let bytes: Vec<char> = src.chars().collect();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            if c == '\n' {
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            if c.is_whitespace() {
                col += 1;
                i += 1;
                continue;
            }
            if c == '#' {
                while i < bytes.len() && bytes[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            let (l0, c0) = (line, col);
            if c.is_ascii_digit() {
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                let num: i64 = bytes[i..j].iter().collect::<String>().parse().unwrap();
                let mut den = 1i64;
                if j < bytes.len() && bytes[j] == '/' && j + 1 < bytes.len() && bytes[j + 1].is_ascii_digit() {
                    let mut k = j + 1;
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    den = bytes[j + 1..k].iter().collect::<String>().parse().unwrap();
                    col += k - i;
                    i = k;
                } else {
                    col += j - i;
                    i = j;
                }
                toks.push((Tok::Number(num, den), l0, c0));
                continue;
            }
            if c.is_alphabetic() || c == '_' {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_alphanumeric() || bytes[j] == '_' || bytes[j] == '\'')
                {
                    j += 1;
                }
                toks.push((Tok::Ident(bytes[i..j].iter().collect()), l0, c0));
                col += j - i;
                i = j;
                continue;
            }
            let mut matched = false;
            for s in SYMBOLS {
                let chars: Vec<char> = s.chars().collect();
                if bytes[i..].starts_with(&chars) {
                    toks.push((Tok::Sym(s), l0, c0));
                    col += chars.len();
                    i += chars.len();
                    matched = true;
                    break;
                }
            }
            if !matched {
                return Err(ParseError {
                    line: l0,
                    col: c0,
                    msg: format!("unexpected character `{c}`"),
                });
            }
        }
        toks.push((Tok::Eof, line, col));
        Ok(Lexer { toks, pos: 0 })
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    pub fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].0
    }

    pub fn here(&self) -> (usize, usize) {
        let (_, l, c) = self.toks[self.pos];
        (l, c)
    }

    pub fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn error(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError {
            line,
            col,
            msg: msg.into(),
        }
    }

    pub fn eat_sym(&mut self, s: &'static str) -> bool {
        if self.peek() == &Tok::Sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect_sym(&mut self, s: &'static str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{s}`, found {}", self.peek())))
        }
    }

    pub fn eat_kw(&mut self, kw: &str) -> bool {
        if let Tok::Ident(s) = self.peek() {
            if s == kw {
                self.bump();
                return true;
            }
        }
        false
    }

    pub fn expect_ident(&mut self) -> Result<String, ParseError> {
        match self.bump() {
            Tok::Ident(s) => Ok(s),
            t => Err(self.error(format!("expected identifier, found {t}"))),
        }
    }

    pub fn at_ident(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }
}

/// Parses a constraint: comparisons joined by `and` / `or` / `not`, with
/// parentheses and the literals `true` / `false`.
pub fn parse_constraint(lx: &mut Lexer) -> Result<SConstraint, ParseError> {
    parse_or(lx)
}

fn parse_or(lx: &mut Lexer) -> Result<SConstraint, ParseError> {
    let mut parts = vec![parse_and(lx)?];
    while lx.eat_kw("or") {
        parts.push(parse_and(lx)?);
    }
    Ok(SConstraint::or(parts))
}

fn parse_and(lx: &mut Lexer) -> Result<SConstraint, ParseError> {
    let mut parts = vec![parse_atom(lx)?];
    while lx.eat_kw("and") {
        parts.push(parse_atom(lx)?);
    }
    Ok(SConstraint::and(parts))
}

fn parse_atom(lx: &mut Lexer) -> Result<SConstraint, ParseError> {
    if lx.eat_kw("true") {
        return Ok(SConstraint::Bool(true));
    }
    if lx.eat_kw("false") {
        return Ok(SConstraint::Bool(false));
    }
    if lx.eat_kw("not") {
        lx.expect_sym("(")?;
        let c = parse_or(lx)?;
        lx.expect_sym(")")?;
        return Ok(SConstraint::Not(Box::new(c)));
    }
    if lx.eat_sym("(") {
        let c = parse_or(lx)?;
        lx.expect_sym(")")?;
        return Ok(c);
    }
    let l = lx.expect_ident()?;
    let rel = if lx.eat_sym("=") {
        Rel::Eq
    } else if lx.eat_sym("!=") {
        Rel::Ne
    } else if lx.eat_sym("<=") {
        Rel::Le
    } else if lx.eat_sym(">=") {
        Rel::Ge
    } else if lx.eat_sym("<") {
        Rel::Lt
    } else if lx.eat_sym(">") {
        Rel::Gt
    } else {
        return Err(lx.error(format!("expected comparison operator, found {}", lx.peek())));
    };
    let r = lx.expect_ident()?;
    Ok(SConstraint::Cmp(l, rel, r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constraint_round_trip() {
        let src = "a < b and (b = c or not (a != d)) and true";
        let mut lx = Lexer::new(src).unwrap();
        let c = parse_constraint(&mut lx).unwrap();
        let printed = c.to_string();
        let mut lx2 = Lexer::new(&printed).unwrap();
        let c2 = parse_constraint(&mut lx2).unwrap();
        assert_eq!(c, c2);
    }

    #[test]
    fn lexer_positions() {
        let err = Lexer::new("a ?\n").unwrap_err();
        assert_eq!((err.line, err.col), (1, 3));
    }
}
