//! Prolog-style query text: `Q(x, y) :- likes(x, 'Duvel'), visits(x, y).`

use std::collections::HashMap;

use thiserror::Error;

use crate::query::{Atom, ConjunctiveQuery, QueryError, Term};
use crate::relational::{Constant, Schema};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("constants are not allowed in the head")]
    ConstantInHead,
    #[error(transparent)]
    Query(#[from] QueryError),
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Quoted(String),
    Sym(String),
    Underscore,
    LParen,
    RParen,
    Comma,
    Turnstile,
    Period,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let bytes: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |offset: usize, message: &str| ParseError::Syntax {
        offset,
        message: message.to_string(),
    };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                out.push((start, Token::LParen));
                i += 1
            }
            ')' => {
                out.push((start, Token::RParen));
                i += 1
            }
            ',' => {
                out.push((start, Token::Comma));
                i += 1
            }
            '.' => {
                out.push((start, Token::Period));
                i += 1
            }
            ':' => {
                if bytes.get(i + 1) != Some(&'-') {
                    return Err(err(i, "expected `:-`"));
                }
                out.push((start, Token::Turnstile));
                i += 2;
            }
            '\'' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match bytes.get(i) {
                        None => return Err(err(start, "unterminated string")),
                        Some('\'') if bytes.get(i + 1) == Some(&'\'') => {
                            s.push('\'');
                            i += 2;
                        }
                        Some('\'') => {
                            i += 1;
                            break;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                out.push((start, Token::Quoted(s)));
            }
            '$' => {
                i += 1;
                let s: String = bytes[i..]
                    .iter()
                    .take_while(|c| c.is_ascii_alphanumeric() || **c == '_')
                    .collect();
                if s.is_empty() {
                    return Err(err(start, "expected symbolic constant name after `$`"));
                }
                i += s.chars().count();
                out.push((start, Token::Sym(s)));
            }
            '_' if !bytes
                .get(i + 1)
                .is_some_and(|c| c.is_ascii_alphanumeric() || *c == '_') =>
            {
                out.push((start, Token::Underscore));
                i += 1;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let s: String = bytes[i..]
                    .iter()
                    .take_while(|c| c.is_ascii_alphanumeric() || **c == '_')
                    .collect();
                i += s.chars().count();
                out.push((start, Token::Ident(s)));
            }
            other => return Err(err(i, &format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
    vars: HashMap<String, u32>,
    syms: HashMap<String, u32>,
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            tokens: tokenize(text)?,
            pos: 0,
            end: text.len(),
            vars: HashMap::new(),
            syms: HashMap::new(),
        })
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn error(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|t| &t.1)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|t| t.1.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Token::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(&format!("expected {what}"))),
        }
    }

    fn var(&mut self, name: String) -> Result<u32, ParseError> {
        if !name.starts_with(|c: char| c.is_ascii_lowercase()) {
            return Err(self.error(&format!("variable `{name}` must start with a lowercase letter")));
        }
        let next = self.vars.len() as u32;
        Ok(*self.vars.entry(name).or_insert(next))
    }

    /// Comma separated list between parentheses.
    fn list<T>(
        &mut self,
        mut item: impl FnMut(&mut Self) -> Result<T, ParseError>,
    ) -> Result<Vec<T>, ParseError> {
        self.expect(Token::LParen, "`(`")?;
        let mut items = Vec::new();
        if self.peek() == Some(&Token::RParen) {
            self.pos += 1;
            return Ok(items);
        }
        loop {
            items.push(item(self)?);
            match self.next() {
                Some(Token::Comma) => continue,
                Some(Token::RParen) => return Ok(items),
                _ => {
                    self.pos -= 1;
                    return Err(self.error("expected `,` or `)`"));
                }
            }
        }
    }

    fn term(&mut self, allow_wildcard: bool) -> Result<Term, ParseError> {
        match self.next() {
            Some(Token::Ident(name)) => Ok(Term::Var(self.var(name)?)),
            Some(Token::Quoted(s)) => Ok(Term::Const(Constant::new(s))),
            Some(Token::Sym(name)) => {
                let next = self.syms.len() as u32;
                Ok(Term::Sym(*self.syms.entry(name).or_insert(next)))
            }
            Some(Token::Underscore) if allow_wildcard => {
                let fresh = format!("_{}", self.vars.len());
                let id = self.vars.len() as u32;
                self.vars.insert(fresh, id);
                Ok(Term::Var(id))
            }
            _ => {
                self.pos -= 1;
                Err(self.error("expected a term"))
            }
        }
    }

    fn atom(&mut self, schema: &Schema, allow_wildcard: bool) -> Result<Atom, ParseError> {
        let relation = self.ident("relation name")?;
        let args = self.list(|p| p.term(allow_wildcard))?;
        let expected = schema
            .arity(&relation)
            .ok_or_else(|| QueryError::UnknownRelation(relation.clone()))?;
        if expected != args.len() {
            return Err(QueryError::Arity {
                relation,
                expected,
                found: args.len(),
            }
            .into());
        }
        Ok(Atom::new(&relation, args))
    }
}

/// Parses `Name(v1,...,vk) :- atom, ... .` against `schema`.
///
/// Variables are numbered in order of first appearance, head first; symbolic
/// constants (`$name`) likewise. The trailing period is optional.
pub fn parse_query(text: &str, schema: &Schema) -> Result<ConjunctiveQuery, ParseError> {
    let mut p = Parser::new(text)?;
    p.ident("query name")?;
    let head_terms = p.list(|p| match p.peek() {
        Some(Token::Quoted(_)) | Some(Token::Sym(_)) => Err(ParseError::ConstantInHead),
        _ => {
            let name = p.ident("head variable")?;
            p.var(name)
        }
    })?;
    p.expect(Token::Turnstile, "`:-`")?;
    let mut body = vec![p.atom(schema, false)?];
    while p.peek() == Some(&Token::Comma) {
        p.pos += 1;
        body.push(p.atom(schema, false)?);
    }
    if p.peek() == Some(&Token::Period) {
        p.pos += 1;
    }
    if p.pos < p.tokens.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(ConjunctiveQuery::new(head_terms, body)?)
}

/// Parses a key-atom pattern such as `visits(_,_)`; every argument must be `_`.
pub fn parse_key_atom(text: &str, schema: &Schema) -> Result<String, ParseError> {
    let mut p = Parser::new(text)?;
    let atom = p.atom(schema, true)?;
    if p.pos < p.tokens.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(atom.relation.to_string())
}
