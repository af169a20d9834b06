//! Text syntax for both logics.
//!
//! Binding strength, tightest first: unary operators, `U` and `S`, `&`,
//! `|`, then `->`. Binary operators associate to the right. Quantifier
//! bodies extend as far right as possible.

use super::fo::Fo;
use super::pltl::Pltl;
use super::LogicError;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Not,
    And,
    Or,
    Implies,
    Less,
    Dot,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, LogicError> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        let tok = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '!' | '~' => Tok::Not,
            '&' => Tok::And,
            '|' => Tok::Or,
            '<' => Tok::Less,
            '.' => Tok::Dot,
            '-' if bytes.get(i + 1) == Some(&b'>') => {
                i += 1;
                Tok::Implies
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                while i + 1 < bytes.len()
                    && (bytes[i + 1].is_ascii_alphanumeric()
                        || bytes[i + 1] == b'_'
                        || bytes[i + 1] == b'\'')
                {
                    i += 1;
                }
                Tok::Ident(text[start..=i].to_string())
            }
            other => {
                return Err(LogicError::Parse {
                    pos: start,
                    msg: format!("unexpected character {other:?}"),
                })
            }
        };
        out.push((start, tok));
        i += 1;
    }
    Ok(out)
}

struct Cursor {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Cursor {
    fn new(text: &str) -> Result<Self, LogicError> {
        Ok(Cursor {
            toks: lex(text)?,
            at: 0,
            end: text.len(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, LogicError> {
        Err(LogicError::Parse {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<(), LogicError> {
        if self.eat(t) {
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn ident(&mut self) -> Result<String, LogicError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.at += 1;
                Ok(s)
            }
            _ => self.err("expected an identifier"),
        }
    }

    fn peek_ident(&self, name: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == name)
    }

    fn done(&self) -> Result<(), LogicError> {
        if self.at == self.toks.len() {
            Ok(())
        } else {
            self.err("unexpected trailing input")
        }
    }
}

pub fn parse_pltl(text: &str) -> Result<Pltl, LogicError> {
    let mut c = Cursor::new(text)?;
    let f = pltl_implies(&mut c)?;
    c.done()?;
    Ok(f)
}

fn pltl_implies(c: &mut Cursor) -> Result<Pltl, LogicError> {
    let lhs = pltl_or(c)?;
    if c.eat(&Tok::Implies) {
        let rhs = pltl_implies(c)?;
        return Ok(Pltl::implies(lhs, rhs));
    }
    Ok(lhs)
}

fn pltl_or(c: &mut Cursor) -> Result<Pltl, LogicError> {
    let lhs = pltl_and(c)?;
    if c.eat(&Tok::Or) {
        return Ok(Pltl::or(lhs, pltl_or(c)?));
    }
    Ok(lhs)
}

fn pltl_and(c: &mut Cursor) -> Result<Pltl, LogicError> {
    let lhs = pltl_binary(c)?;
    if c.eat(&Tok::And) {
        return Ok(Pltl::and(lhs, pltl_and(c)?));
    }
    Ok(lhs)
}

fn pltl_binary(c: &mut Cursor) -> Result<Pltl, LogicError> {
    let lhs = pltl_unary(c)?;
    if c.peek_ident("U") {
        c.at += 1;
        return Ok(Pltl::Until(Box::new(lhs), Box::new(pltl_binary(c)?)));
    }
    if c.peek_ident("S") {
        c.at += 1;
        return Ok(Pltl::Since(Box::new(lhs), Box::new(pltl_binary(c)?)));
    }
    Ok(lhs)
}

fn pltl_unary(c: &mut Cursor) -> Result<Pltl, LogicError> {
    if c.eat(&Tok::Not) {
        return Ok(Pltl::not(pltl_unary(c)?));
    }
    if c.eat(&Tok::LParen) {
        let f = pltl_implies(c)?;
        c.expect(&Tok::RParen, "')'")?;
        return Ok(f);
    }
    let name = c.ident()?;
    match name.as_str() {
        "X" => Ok(Pltl::Next(Box::new(pltl_unary(c)?))),
        "Y" => Ok(Pltl::Prev(Box::new(pltl_unary(c)?))),
        "F" => Ok(Pltl::eventually(pltl_unary(c)?)),
        "G" => Ok(Pltl::always(pltl_unary(c)?)),
        "true" => Ok(Pltl::True),
        "false" => Ok(Pltl::not(Pltl::True)),
        "U" | "S" => {
            c.at -= 1;
            c.err(format!("{name} needs a left operand"))
        }
        _ => Ok(Pltl::Atom(name)),
    }
}

pub fn parse_fo(text: &str) -> Result<Fo, LogicError> {
    let mut c = Cursor::new(text)?;
    let f = fo_implies(&mut c)?;
    c.done()?;
    Ok(f)
}

fn fo_implies(c: &mut Cursor) -> Result<Fo, LogicError> {
    if let Some(q) = fo_quantifier(c)? {
        return Ok(q);
    }
    let lhs = fo_or(c)?;
    if c.eat(&Tok::Implies) {
        return Ok(Fo::implies(lhs, fo_implies(c)?));
    }
    Ok(lhs)
}

/// `exists z.` / `forall z.` with the body parsed at the lowest precedence.
fn fo_quantifier(c: &mut Cursor) -> Result<Option<Fo>, LogicError> {
    let exists = c.peek_ident("exists");
    if !exists && !c.peek_ident("forall") {
        return Ok(None);
    }
    c.at += 1;
    let var = c.ident()?;
    c.expect(&Tok::Dot, "'.' after the quantified variable")?;
    let body = fo_implies(c)?;
    Ok(Some(if exists {
        Fo::exists(var, body)
    } else {
        Fo::forall(var, body)
    }))
}

fn fo_or(c: &mut Cursor) -> Result<Fo, LogicError> {
    let lhs = fo_and(c)?;
    if c.eat(&Tok::Or) {
        let rhs = match fo_quantifier(c)? {
            Some(q) => q,
            None => fo_or(c)?,
        };
        return Ok(Fo::or(lhs, rhs));
    }
    Ok(lhs)
}

fn fo_and(c: &mut Cursor) -> Result<Fo, LogicError> {
    let lhs = fo_unary(c)?;
    if c.eat(&Tok::And) {
        let rhs = match fo_quantifier(c)? {
            Some(q) => q,
            None => fo_and(c)?,
        };
        return Ok(Fo::and(lhs, rhs));
    }
    Ok(lhs)
}

fn fo_unary(c: &mut Cursor) -> Result<Fo, LogicError> {
    if c.eat(&Tok::Not) {
        if let Some(q) = fo_quantifier(c)? {
            return Ok(Fo::not(q));
        }
        return Ok(Fo::not(fo_unary(c)?));
    }
    if c.eat(&Tok::LParen) {
        let f = fo_implies(c)?;
        c.expect(&Tok::RParen, "')'")?;
        return Ok(f);
    }
    let name = c.ident()?;
    match name.as_str() {
        "true" => return Ok(Fo::True),
        "false" => return Ok(Fo::not(Fo::True)),
        _ => {}
    }
    if c.eat(&Tok::LParen) {
        let var = c.ident()?;
        c.expect(&Tok::RParen, "')'")?;
        return Ok(Fo::Atom(name, var));
    }
    if c.eat(&Tok::Less) {
        let rhs = c.ident()?;
        return Ok(Fo::Less(name, rhs));
    }
    c.err(format!("expected p(z) or z < z' after {name:?}"))
}
