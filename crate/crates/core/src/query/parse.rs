//! S-expression syntax: `(e NAME)`, `(p REL Q)`, `(and Q Q ...)`,
//! `(or Q Q ...)`, `(not Q)`. Names containing whitespace, parentheses or
//! quotes are written as double-quoted strings with `\` escapes.

use crate::error::{Error, Result};
use crate::kb::Vocab;

use super::Query;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open(usize),
    Close(usize),
    Atom(String, usize),
}

fn syntax(pos: usize, msg: impl Into<String>) -> Error {
    Error::QuerySyntax {
        pos,
        msg: msg.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, ch)) = chars.peek() {
        match ch {
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' => {
                out.push(Token::Open(i));
                chars.next();
            }
            ')' => {
                out.push(Token::Close(i));
                chars.next();
            }
            '"' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some((_, '"')) => break,
                        Some((_, '\\')) => match chars.next() {
                            Some((_, c)) => s.push(c),
                            None => return Err(syntax(i, "unterminated string")),
                        },
                        Some((_, c)) => s.push(c),
                        None => return Err(syntax(i, "unterminated string")),
                    }
                }
                out.push(Token::Atom(s, i));
            }
            _ => {
                let mut s = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == '"' {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                out.push(Token::Atom(s, i));
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    at: usize,
    end: usize,
    vocab: &'a Vocab,
}

impl Parser<'_> {
    fn pos(&self) -> usize {
        match self.tokens.get(self.at) {
            Some(Token::Open(p) | Token::Close(p) | Token::Atom(_, p)) => *p,
            None => self.end,
        }
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.at).cloned();
        self.at += 1;
        t
    }

    fn atom(&mut self, what: &str) -> Result<(String, usize)> {
        let pos = self.pos();
        match self.next() {
            Some(Token::Atom(s, p)) => Ok((s, p)),
            _ => Err(syntax(pos, format!("expected {what}"))),
        }
    }

    fn expr(&mut self) -> Result<Query> {
        let pos = self.pos();
        match self.next() {
            Some(Token::Open(_)) => {}
            Some(Token::Close(p)) => return Err(syntax(p, "unbalanced `)`")),
            Some(Token::Atom(_, p)) => return Err(syntax(p, "expected `(`")),
            None => return Err(syntax(pos, "unexpected end of input")),
        }
        let (head, hpos) = self.atom("operator")?;
        let q = match head.as_str() {
            "e" => {
                let (name, p) = self.atom("entity name")?;
                let id = self
                    .vocab
                    .entity(&name)
                    .ok_or_else(|| syntax(p, format!("unknown entity `{name}`")))?;
                Query::Anchor(id)
            }
            "p" => {
                let (name, p) = self.atom("relation name")?;
                let rel = self
                    .vocab
                    .relation(&name)
                    .ok_or_else(|| syntax(p, format!("unknown relation `{name}`")))?;
                Query::proj(rel, self.expr()?)
            }
            "not" => Query::negate(self.expr()?),
            "and" | "or" => {
                let mut children = Vec::new();
                while !matches!(self.tokens.get(self.at), Some(Token::Close(_)) | None) {
                    children.push(self.expr()?);
                }
                if children.len() < 2 {
                    return Err(syntax(hpos, format!("`{head}` needs at least two operands")));
                }
                if head == "and" {
                    Query::And(children)
                } else {
                    Query::Or(children)
                }
            }
            other => return Err(syntax(hpos, format!("unknown operator `{other}`"))),
        };
        let pos = self.pos();
        match self.next() {
            Some(Token::Close(_)) => Ok(q),
            _ => Err(syntax(pos, "expected `)`")),
        }
    }
}

/// Parses a query, resolving names through `vocab`.
pub fn parse_query(text: &str, vocab: &Vocab) -> Result<Query> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        at: 0,
        end: text.len(),
        vocab,
    };
    let q = p.expr()?;
    if p.at < p.tokens.len() {
        return Err(syntax(p.pos(), "trailing input after query"));
    }
    if matches!(q, Query::Anchor(_)) {
        return Err(syntax(0, "a bare anchor is not a query"));
    }
    Ok(q)
}

fn push_name(out: &mut String, name: &str) {
    let plain = !name.is_empty()
        && !name
            .chars()
            .any(|c| c.is_whitespace() || c == '(' || c == ')' || c == '"' || c == '\\');
    if plain {
        out.push_str(name);
    } else {
        out.push('"');
        for c in name.chars() {
            if c == '"' || c == '\\' {
                out.push('\\');
            }
            out.push(c);
        }
        out.push('"');
    }
}

fn render_into(q: &Query, vocab: &Vocab, out: &mut String) {
    match q {
        Query::Anchor(e) => {
            out.push_str("(e ");
            push_name(out, vocab.entity_name(*e));
        }
        Query::Proj(r, c) => {
            out.push_str("(p ");
            push_name(out, vocab.relation_name(*r));
            out.push(' ');
            render_into(c, vocab, out);
        }
        Query::Not(c) => {
            out.push_str("(not ");
            render_into(c, vocab, out);
        }
        Query::And(cs) | Query::Or(cs) => {
            out.push_str(if matches!(q, Query::And(_)) { "(and" } else { "(or" });
            for c in cs {
                out.push(' ');
                render_into(c, vocab, out);
            }
        }
    }
    out.push(')');
}

pub fn render_query(q: &Query, vocab: &Vocab) -> String {
    let mut out = String::new();
    render_into(q, vocab, &mut out);
    out
}
