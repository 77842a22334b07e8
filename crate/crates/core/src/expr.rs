//! Boolean expression trees shared by the question-level logic and the
//! point-level schema language, plus a small precedence-climbing parser
//! (`!` binds tighter than `&`, which binds tighter than `|`).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr<A> {
    Atom(A),
    Not(Box<Expr<A>>),
    /// At least two children.
    And(Vec<Expr<A>>),
    /// At least two children.
    Or(Vec<Expr<A>>),
    Const(bool),
}

impl<A> Expr<A> {
    pub fn atom(a: A) -> Self {
        Expr::Atom(a)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr<A>) -> Self {
        Expr::Not(Box::new(e))
    }

    /// Conjunction; flattens nested conjunctions and collapses arity 0 or 1.
    pub fn and(children: impl IntoIterator<Item = Expr<A>>) -> Self {
        let mut flat = Vec::new();
        for c in children {
            match c {
                Expr::And(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => Expr::Const(true),
            1 => flat.pop().unwrap(),
            _ => Expr::And(flat),
        }
    }

    /// Disjunction; flattens nested disjunctions and collapses arity 0 or 1.
    pub fn or(children: impl IntoIterator<Item = Expr<A>>) -> Self {
        let mut flat = Vec::new();
        for c in children {
            match c {
                Expr::Or(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => Expr::Const(false),
            1 => flat.pop().unwrap(),
            _ => Expr::Or(flat),
        }
    }

    pub fn eval(&self, value: &impl Fn(&A) -> bool) -> bool {
        match self {
            Expr::Atom(a) => value(a),
            Expr::Not(e) => !e.eval(value),
            Expr::And(cs) => cs.iter().all(|c| c.eval(value)),
            Expr::Or(cs) => cs.iter().any(|c| c.eval(value)),
            Expr::Const(b) => *b,
        }
    }

    /// Replace every atom by an expression over another atom type.
    pub fn substitute<B>(&self, f: &impl Fn(&A) -> Expr<B>) -> Expr<B> {
        match self {
            Expr::Atom(a) => f(a),
            Expr::Not(e) => Expr::not(e.substitute(f)),
            Expr::And(cs) => Expr::and(cs.iter().map(|c| c.substitute(f))),
            Expr::Or(cs) => Expr::or(cs.iter().map(|c| c.substitute(f))),
            Expr::Const(b) => Expr::Const(*b),
        }
    }

    pub fn atoms(&self) -> Vec<&A> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a A>) {
        match self {
            Expr::Atom(a) => out.push(a),
            Expr::Not(e) => e.collect_atoms(out),
            Expr::And(cs) | Expr::Or(cs) => cs.iter().for_each(|c| c.collect_atoms(out)),
            Expr::Const(_) => {}
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Or(_) => 0,
            Expr::And(_) => 1,
            Expr::Not(_) => 2,
            Expr::Atom(_) | Expr::Const(_) => 3,
        }
    }
}

impl<A: fmt::Display> Expr<A> {
    fn fmt_child(&self, child: &Expr<A>, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if child.precedence() <= self.precedence() && !matches!(child, Expr::Not(_)) {
            write!(f, "({child})")
        } else {
            write!(f, "{child}")
        }
    }
}

impl<A: fmt::Display> fmt::Display for Expr<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Atom(a) => write!(f, "{a}"),
            Expr::Const(b) => write!(f, "{b}"),
            Expr::Not(e) => {
                f.write_str("!")?;
                if matches!(**e, Expr::Atom(_) | Expr::Const(_) | Expr::Not(_)) {
                    write!(f, "{e}")
                } else {
                    write!(f, "({e})")
                }
            }
            Expr::And(cs) | Expr::Or(cs) => {
                let sep = if matches!(self, Expr::And(_)) { " & " } else { " | " };
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    self.fmt_child(c, f)?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    LParen,
    RParen,
    And,
    Or,
    Not,
    Ident(String),
    Sym(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// 1-based character column within the line.
    pub column: usize,
}

/// Token stream over one line of expression text.
#[derive(Debug)]
pub struct Lexer {
    tokens: Vec<Token>,
    pos: usize,
    line: usize,
    end_column: usize,
}

impl Lexer {
    /// Tokenize `text`, which starts at `first_column` of `line`.
    pub fn new(text: &str, line: usize, first_column: usize) -> Result<Self> {
        let chars: Vec<char> = text.chars().collect();
        let mut tokens = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let column = first_column + i;
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let kind = match c {
                '(' => TokenKind::LParen,
                ')' => TokenKind::RParen,
                '&' => TokenKind::And,
                '|' => TokenKind::Or,
                '!' => TokenKind::Not,
                '<' | '>' if chars.get(i + 1) == Some(&'=') => {
                    i += 1;
                    TokenKind::Sym(format!("{c}="))
                }
                '<' | '>' | '=' | '~' | '{' | '}' | ',' => TokenKind::Sym(c.to_string()),
                c if c.is_alphanumeric() || c == '_' => {
                    let start = i;
                    while i + 1 < chars.len() && (chars[i + 1].is_alphanumeric() || chars[i + 1] == '_') {
                        i += 1;
                    }
                    TokenKind::Ident(chars[start..=i].iter().collect())
                }
                other => return Err(Error::parse(line, column, format!("unexpected character `{other}`"))),
            };
            tokens.push(Token { kind, column });
            i += 1;
        }
        Ok(Lexer {
            tokens,
            pos: 0,
            line,
            end_column: first_column + chars.len(),
        })
    }

    pub fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    pub fn next_token(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    /// Column of the next token, or one past the end of input.
    pub fn column(&self) -> usize {
        self.peek().map_or(self.end_column, |t| t.column)
    }

    pub fn error(&self, column: usize, message: impl Into<String>) -> Error {
        Error::parse(self.line, column, message)
    }

    pub fn expect_sym(&mut self, sym: &str) -> Result<()> {
        let column = self.column();
        match self.next_token() {
            Some(Token { kind: TokenKind::Sym(s), .. }) if s == sym => Ok(()),
            Some(t) => Err(self.error(t.column, format!("expected `{sym}`, found {:?}", t.kind))),
            None => Err(self.error(column, format!("expected `{sym}`, found end of input"))),
        }
    }
}

/// Parses one atom from the token stream.
pub trait AtomParser {
    type Atom;
    fn parse_atom(&self, lex: &mut Lexer) -> Result<Self::Atom>;
}

pub fn parse<P: AtomParser>(text: &str, line: usize, first_column: usize, atoms: &P) -> Result<Expr<P::Atom>> {
    let mut lex = Lexer::new(text, line, first_column)?;
    let e = parse_or(&mut lex, atoms)?;
    if let Some(t) = lex.peek() {
        return Err(lex.error(t.column, format!("unexpected trailing token {:?}", t.kind)));
    }
    Ok(e)
}

fn parse_or<P: AtomParser>(lex: &mut Lexer, atoms: &P) -> Result<Expr<P::Atom>> {
    let mut children = vec![parse_and(lex, atoms)?];
    while matches!(lex.peek(), Some(Token { kind: TokenKind::Or, .. })) {
        lex.next_token();
        children.push(parse_and(lex, atoms)?);
    }
    Ok(if children.len() == 1 { children.pop().unwrap() } else { Expr::Or(children) })
}

fn parse_and<P: AtomParser>(lex: &mut Lexer, atoms: &P) -> Result<Expr<P::Atom>> {
    let mut children = vec![parse_unary(lex, atoms)?];
    while matches!(lex.peek(), Some(Token { kind: TokenKind::And, .. })) {
        lex.next_token();
        children.push(parse_unary(lex, atoms)?);
    }
    Ok(if children.len() == 1 { children.pop().unwrap() } else { Expr::And(children) })
}

fn parse_unary<P: AtomParser>(lex: &mut Lexer, atoms: &P) -> Result<Expr<P::Atom>> {
    let column = lex.column();
    match lex.peek().map(|t| t.kind.clone()) {
        Some(TokenKind::Not) => {
            lex.next_token();
            Ok(Expr::not(parse_unary(lex, atoms)?))
        }
        Some(TokenKind::LParen) => {
            lex.next_token();
            let inner = parse_or(lex, atoms)?;
            match lex.next_token() {
                Some(Token { kind: TokenKind::RParen, .. }) => Ok(inner),
                Some(t) => Err(lex.error(t.column, format!("expected `)`, found {:?}", t.kind))),
                None => Err(lex.error(lex.column(), "unclosed `(`")),
            }
        }
        Some(TokenKind::Ident(id)) if id == "true" || id == "false" => {
            lex.next_token();
            Ok(Expr::Const(id == "true"))
        }
        Some(_) => Ok(Expr::Atom(atoms.parse_atom(lex)?)),
        None => Err(lex.error(column, "expected an expression, found end of input")),
    }
}
