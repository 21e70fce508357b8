//! Surface syntax for `.pcfr` files.
//!
//! Grammar (informal):
//!
//! ```text
//! term  := \x:TYPE. term | fix f:TYPE. term | if term then term else term | sum
//! sum   := prod (('+' | '-') prod)*
//! prod  := unary ('*' unary)*
//! unary := '-' unary | app
//! app   := atom atom*
//! atom  := ident | number | '(' term ')' | '<' term, ..., term '>'
//!        | proj NAT NAT atom | phi(term, ..., term) | `quoted`(term, ...)
//! TYPE  := R | 1 | TYPE -> TYPE (right assoc) | '(' TYPE ('*' TYPE)* ')'
//! ```
//!
//! A bare `phi(` is a primitive application when `phi` is registered and not
//! shadowed by a binder; backquoted names admit symbols that are not plain
//! identifiers (the synthesized monomial families). `if P then M else N`
//! selects the *then* branch when P evaluates to a numeral <= 0 — this is
//! the calculus' ite, not a boolean test. `--` starts a line comment; the
//! comment `-- args: x y` pins the argument order of an open term.

use std::collections::HashMap;
use std::rc::Rc;

use crate::registry::{PrimRegistry, PrimSymbol};
use crate::syntax::{mk_numeral, Term, TypeExpr};
use crate::typecheck::Program;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

/// Source locations of parsed nodes, keyed by node identity.
#[derive(Debug, Clone, Default)]
pub struct SpanTable {
    map: HashMap<usize, Span>,
}

impl SpanTable {
    pub fn insert(&mut self, t: &Rc<Term>, s: Span) {
        self.map.insert(Rc::as_ptr(t) as usize, s);
    }

    pub fn get(&self, t: &Rc<Term>) -> Option<Span> {
        self.map.get(&(Rc::as_ptr(t) as usize)).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub message: String,
    pub line: usize,
    pub col: usize,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Quoted(String),
    Lambda,
    Dot,
    Colon,
    Comma,
    LParen,
    RParen,
    LAngle,
    RAngle,
    Arrow,
    Plus,
    Minus,
    Star,
    If,
    Then,
    Else,
    Fix,
    ProjKw,
    Eof,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier {s}"),
            Tok::Number(r) => write!(f, "number {r:?}"),
            Tok::Quoted(s) => write!(f, "`{s}`"),
            Tok::Lambda => write!(f, "'\\'"),
            Tok::Dot => write!(f, "'.'"),
            Tok::Colon => write!(f, "':'"),
            Tok::Comma => write!(f, "','"),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
            Tok::LAngle => write!(f, "'<'"),
            Tok::RAngle => write!(f, "'>'"),
            Tok::Arrow => write!(f, "'->'"),
            Tok::Plus => write!(f, "'+'"),
            Tok::Minus => write!(f, "'-'"),
            Tok::Star => write!(f, "'*'"),
            Tok::If => write!(f, "'if'"),
            Tok::Then => write!(f, "'then'"),
            Tok::Else => write!(f, "'else'"),
            Tok::Fix => write!(f, "'fix'"),
            Tok::ProjKw => write!(f, "'proj'"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

struct Lexer<'a> {
    src: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
    /// Variable names from the first `-- args: ...` pragma, if any.
    pragma_args: Option<Vec<String>>,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_cont(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            src: text.chars().peekable(),
            line: 1,
            col: 1,
            pragma_args: None,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.src.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            message: message.into(),
            line: self.line,
            col: self.col,
        })
    }

    fn tokens(mut self) -> Result<(Vec<(Tok, Span)>, Option<Vec<String>>), ParseError> {
        let mut out = Vec::new();
        loop {
            while let Some(&c) = self.src.peek() {
                if c.is_whitespace() {
                    self.bump();
                } else {
                    break;
                }
            }
            // Comments (and the args pragma).
            if self.peek_is('-') {
                let mut clone = self.src.clone();
                clone.next();
                if clone.peek() == Some(&'-') {
                    self.bump();
                    self.bump();
                    let mut text = String::new();
                    while let Some(&c) = self.src.peek() {
                        if c == '\n' {
                            break;
                        }
                        text.push(c);
                        self.bump();
                    }
                    let text = text.trim();
                    if let Some(rest) = text.strip_prefix("args:") {
                        if self.pragma_args.is_none() {
                            self.pragma_args = Some(
                                rest.split_whitespace().map(String::from).collect(),
                            );
                        }
                    }
                    continue;
                }
            }
            let span = Span {
                line: self.line,
                col: self.col,
            };
            let c = match self.src.peek() {
                None => {
                    out.push((Tok::Eof, span));
                    return Ok((out, self.pragma_args));
                }
                Some(&c) => c,
            };
            let tok = if is_ident_start(c) {
                let mut s = String::new();
                while let Some(&c) = self.src.peek() {
                    if is_ident_cont(c) {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                match s.as_str() {
                    "if" => Tok::If,
                    "then" => Tok::Then,
                    "else" => Tok::Else,
                    "fix" => Tok::Fix,
                    "proj" => Tok::ProjKw,
                    _ => Tok::Ident(s),
                }
            } else if c.is_ascii_digit() {
                self.number()?
            } else {
                self.bump();
                match c {
                    '\\' => Tok::Lambda,
                    '.' => Tok::Dot,
                    ':' => Tok::Colon,
                    ',' => Tok::Comma,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '<' => Tok::LAngle,
                    '>' => Tok::RAngle,
                    '+' => Tok::Plus,
                    '*' => Tok::Star,
                    '-' => {
                        if self.peek_is('>') {
                            self.bump();
                            Tok::Arrow
                        } else {
                            Tok::Minus
                        }
                    }
                    '`' => {
                        let mut s = String::new();
                        loop {
                            match self.bump() {
                                None | Some('\n') => {
                                    return self.err("unterminated `...` name")
                                }
                                Some('`') => break,
                                Some(c) => s.push(c),
                            }
                        }
                        Tok::Quoted(s)
                    }
                    other => return self.err(format!("unexpected character {other:?}")),
                }
            };
            out.push((tok, span));
        }
    }

    fn peek_is(&mut self, c: char) -> bool {
        self.src.peek() == Some(&c)
    }

    fn number(&mut self) -> Result<Tok, ParseError> {
        let mut s = String::new();
        while let Some(&c) = self.src.peek() {
            if c.is_ascii_digit() {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if self.peek_is('.') {
            // A dot is part of the number only when a digit follows;
            // otherwise it closes a binder (e.g. `\x:R. 1 . ...` never
            // occurs, but `fix f:R -> R. 1` must not eat `. 1`).
            let mut clone = self.src.clone();
            clone.next();
            if clone.peek().is_some_and(|c| c.is_ascii_digit()) {
                s.push('.');
                self.bump();
                while let Some(&c) = self.src.peek() {
                    if c.is_ascii_digit() {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
        }
        if self.peek_is('e') || self.peek_is('E') {
            let mut clone = self.src.clone();
            clone.next();
            let sign = matches!(clone.peek(), Some('+') | Some('-'));
            if sign {
                clone.next();
            }
            if clone.peek().is_some_and(|c| c.is_ascii_digit()) {
                s.push('e');
                self.bump();
                if sign {
                    s.push(self.bump().unwrap());
                }
                while let Some(&c) = self.src.peek() {
                    if c.is_ascii_digit() {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
        }
        match s.parse::<f64>() {
            Ok(r) if r.is_finite() => Ok(Tok::Number(r)),
            _ => self.err(format!("invalid number literal {s}")),
        }
    }
}

#[derive(Debug)]
pub struct Parsed {
    pub term: Rc<Term>,
    pub spans: SpanTable,
    pub pragma_args: Option<Vec<String>>,
}

struct Parser<'a> {
    toks: Vec<(Tok, Span)>,
    pos: usize,
    reg: &'a PrimRegistry,
    spans: SpanTable,
    scope: Vec<String>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let s = self.span();
        Err(ParseError {
            message: message.into(),
            line: s.line,
            col: s.col,
        })
    }

    fn expect(&mut self, want: &Tok) -> Result<(), ParseError> {
        if self.peek() == want {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected {}, found {}", want, self.peek()))
        }
    }

    fn record(&mut self, t: Rc<Term>, s: Span) -> Rc<Term> {
        self.spans.insert(&t, s);
        t
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            other => self.err(format!("expected identifier, found {other}")),
        }
    }

    fn term(&mut self) -> Result<Rc<Term>, ParseError> {
        let s = self.span();
        match self.peek() {
            Tok::Lambda => {
                self.next();
                let x = self.ident()?;
                self.expect(&Tok::Colon)?;
                let ty = self.type_expr()?;
                self.expect(&Tok::Dot)?;
                self.scope.push(x.clone());
                let body = self.term()?;
                self.scope.pop();
                Ok(self.record(Term::lam(&x, ty, body), s))
            }
            Tok::Fix => {
                self.next();
                let f = self.ident()?;
                self.expect(&Tok::Colon)?;
                let ty = self.type_expr()?;
                self.expect(&Tok::Dot)?;
                self.scope.push(f.clone());
                let body = self.term()?;
                self.scope.pop();
                Ok(self.record(Term::fix(&f, ty, body), s))
            }
            Tok::If => {
                self.next();
                let guard = self.term()?;
                self.expect(&Tok::Then)?;
                let then_b = self.term()?;
                self.expect(&Tok::Else)?;
                let else_b = self.term()?;
                Ok(self.record(Term::cond(guard, then_b, else_b), s))
            }
            _ => self.sum(),
        }
    }

    fn sum(&mut self) -> Result<Rc<Term>, ParseError> {
        let mut acc = self.product()?;
        loop {
            let s = self.span();
            match self.peek() {
                Tok::Plus => {
                    self.next();
                    let rhs = self.product()?;
                    acc = self.record(Term::add(acc, rhs), s);
                }
                Tok::Minus => {
                    self.next();
                    let rhs = self.product()?;
                    acc = self.record(Term::sub(acc, rhs), s);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn product(&mut self) -> Result<Rc<Term>, ParseError> {
        let mut acc = self.unary()?;
        while self.peek() == &Tok::Star {
            let s = self.span();
            self.next();
            let rhs = self.unary()?;
            acc = self.record(Term::mul(acc, rhs), s);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Rc<Term>, ParseError> {
        if self.peek() == &Tok::Minus {
            let s = self.span();
            self.next();
            // Minus directly on a number token folds into a negative
            // numeral; anything else (including a parenthesized literal)
            // stays a negation so printing round-trips.
            if let Tok::Number(r) = *self.peek() {
                self.next();
                let out = mk_numeral(-r).expect("finite");
                return Ok(self.record(out, s));
            }
            let t = self.unary()?;
            return Ok(self.record(Term::neg(t), s));
        }
        self.application()
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Ident(_)
                | Tok::Number(_)
                | Tok::Quoted(_)
                | Tok::LParen
                | Tok::LAngle
                | Tok::ProjKw
        )
    }

    fn application(&mut self) -> Result<Rc<Term>, ParseError> {
        let mut acc = self.atom()?;
        while self.starts_atom() {
            let s = self.span();
            let arg = self.atom()?;
            acc = self.record(Term::app(acc, arg), s);
        }
        Ok(acc)
    }

    fn nat(&mut self) -> Result<usize, ParseError> {
        match *self.peek() {
            Tok::Number(r) if r.fract() == 0.0 && r >= 0.0 && r < 1e9 => {
                self.next();
                Ok(r as usize)
            }
            _ => self.err(format!("expected small natural number, found {}", self.peek())),
        }
    }

    fn prim_args(&mut self) -> Result<Vec<Rc<Term>>, ParseError> {
        self.expect(&Tok::LParen)?;
        let mut args = Vec::new();
        if self.peek() != &Tok::RParen {
            loop {
                args.push(self.term()?);
                if self.peek() == &Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(&Tok::RParen)?;
        Ok(args)
    }

    fn atom(&mut self) -> Result<Rc<Term>, ParseError> {
        let s = self.span();
        match self.peek().clone() {
            Tok::ProjKw => {
                self.next();
                let i = self.nat()?;
                let k = self.nat()?;
                if i < 1 || i > k {
                    return self.err(format!("projection index {i} out of width {k}"));
                }
                let body = self.atom()?;
                Ok(self.record(Term::proj(i, k, body), s))
            }
            Tok::Ident(x) => {
                self.next();
                let shadowed = self.scope.iter().any(|b| b == &x);
                if self.peek() == &Tok::LParen && !shadowed && self.reg.has_symbol(&x)
                {
                    let args = self.prim_args()?;
                    return Ok(
                        self.record(Term::prim(PrimSymbol::named(&x), args), s)
                    );
                }
                Ok(self.record(Term::var(&x), s))
            }
            Tok::Quoted(name) => {
                self.next();
                if !self.reg.has_symbol(&name) {
                    return self.err(format!("unknown primitive `{name}`"));
                }
                let args = self.prim_args()?;
                Ok(self.record(Term::prim(PrimSymbol::named(&name), args), s))
            }
            Tok::Number(r) => {
                self.next();
                Ok(self.record(mk_numeral(r).expect("finite"), s))
            }
            Tok::LParen => {
                self.next();
                let t = self.term()?;
                self.expect(&Tok::RParen)?;
                Ok(t)
            }
            Tok::LAngle => {
                self.next();
                let mut comps = Vec::new();
                if self.peek() != &Tok::RAngle {
                    loop {
                        comps.push(self.term()?);
                        if self.peek() == &Tok::Comma {
                            self.next();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(&Tok::RAngle)?;
                Ok(self.record(Term::tuple(comps), s))
            }
            other => self.err(format!("expected a term, found {other}")),
        }
    }

    fn type_expr(&mut self) -> Result<TypeExpr, ParseError> {
        let lhs = self.type_atom()?;
        if self.peek() == &Tok::Arrow {
            self.next();
            let rhs = self.type_expr()?;
            return Ok(TypeExpr::arrow(lhs, rhs));
        }
        Ok(lhs)
    }

    fn type_atom(&mut self) -> Result<TypeExpr, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "R" => {
                self.next();
                Ok(TypeExpr::Real)
            }
            Tok::Number(r) if r == 1.0 => {
                self.next();
                Ok(TypeExpr::product(vec![]))
            }
            Tok::LParen => {
                self.next();
                let mut comps = vec![self.type_expr()?];
                while self.peek() == &Tok::Star {
                    self.next();
                    comps.push(self.type_expr()?);
                }
                self.expect(&Tok::RParen)?;
                Ok(if comps.len() == 1 {
                    comps.pop().unwrap()
                } else {
                    TypeExpr::product(comps)
                })
            }
            other => self.err(format!("expected a type, found {other}")),
        }
    }
}

/// Parses a term from source text.
pub fn parse(text: &str, reg: &PrimRegistry) -> Result<Parsed, ParseError> {
    let (toks, pragma_args) = Lexer::new(text).tokens()?;
    let mut p = Parser {
        toks,
        pos: 0,
        reg,
        spans: SpanTable::default(),
        scope: Vec::new(),
    };
    let term = p.term()?;
    if p.peek() != &Tok::Eof {
        return p.err(format!("unexpected {} after the term", p.peek()));
    }
    Ok(Parsed {
        term,
        spans: p.spans,
        pragma_args,
    })
}

/// Parses a program: argument order comes from the `-- args:` pragma when
/// present, otherwise from free variables in order of first occurrence.
pub fn parse_program(text: &str, reg: &PrimRegistry) -> Result<Program, ParseError> {
    let parsed = parse(text, reg)?;
    Ok(match parsed.pragma_args {
        Some(vars) => Program::new(parsed.term, vars),
        None => Program::from_term(parsed.term),
    })
}
