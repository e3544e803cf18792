//! Arc-expression language.
//!
//! An arc expression is a parenthesised tuple of terms. Each term is a
//! variable, a numeric constant, or an arithmetic function over variables and
//! constants:
//!
//! ```text
//! expr := "(" term { "," term } ")"
//! term := ident | number | term op term | "(" term ")"
//! op   := "+" | "-" | "*" | "/"
//! ```
//!
//! `*` and `/` bind tighter than `+` and `-`; all operators are left-associative.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::value::{DomainKind, Value};

/// Variable assignment used to evaluate expressions.
pub type Binding = HashMap<String, Value>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Literal {
    Int(u64),
    Real(f64),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(n) => write!(f, "{n}"),
            Literal::Real(r) => write!(f, "{r:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

impl Op {
    fn precedence(self) -> u8 {
        match self {
            Op::Add | Op::Sub => 1,
            Op::Mul | Op::Div => 2,
        }
    }

    fn symbol(self) -> char {
        match self {
            Op::Add => '+',
            Op::Sub => '-',
            Op::Mul => '*',
            Op::Div => '/',
        }
    }
}

/// Arithmetic body of a function term.
#[derive(Debug, Clone, PartialEq)]
pub enum Arith {
    Var(String),
    Lit(Literal),
    Bin(Op, Box<Arith>, Box<Arith>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Var(String),
    Const(Literal),
    Func(Arith),
}

impl Term {
    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }

    /// Evaluates the term under `binding` and coerces the result into `domain`.
    pub fn eval(&self, binding: &Binding, domain: DomainKind) -> Result<Value, EvalError> {
        let raw = match self {
            Term::Var(name) => binding
                .get(name)
                .cloned()
                .ok_or_else(|| EvalError::Unbound(name.clone()))?,
            Term::Const(lit) => lit_value(*lit),
            Term::Func(arith) => arith.eval(binding)?.into_value(),
        };
        domain
            .admit(&raw)
            .ok_or(EvalError::OutOfDomain { value: raw, domain })
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Term::Var(v) => out.push(v),
            Term::Const(_) => {}
            Term::Func(a) => a.collect_vars(out),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(lit) => write!(f, "{lit}"),
            Term::Func(a) => write!(f, "{a}"),
        }
    }
}

fn lit_value(lit: Literal) -> Value {
    match lit {
        Literal::Int(n) => Value::Nat(n),
        Literal::Real(r) => Value::Real(r),
    }
}

#[derive(Debug, Clone, Copy)]
enum Num {
    Int(i128),
    Real(f64),
}

impl Num {
    fn as_f64(self) -> f64 {
        match self {
            Num::Int(i) => i as f64,
            Num::Real(r) => r,
        }
    }

    fn into_value(self) -> Value {
        match self {
            Num::Int(i) if (0..=u64::MAX as i128).contains(&i) => Value::Nat(i as u64),
            Num::Int(i) => Value::Real(i as f64),
            Num::Real(r) => Value::Real(r),
        }
    }
}

impl Arith {
    fn eval(&self, binding: &Binding) -> Result<Num, EvalError> {
        match self {
            Arith::Var(name) => match binding.get(name) {
                Some(Value::Nat(n)) => Ok(Num::Int(*n as i128)),
                Some(Value::Real(r)) => Ok(Num::Real(*r)),
                Some(Value::Str(_)) => Err(EvalError::NonNumeric(name.clone())),
                None => Err(EvalError::Unbound(name.clone())),
            },
            Arith::Lit(Literal::Int(n)) => Ok(Num::Int(*n as i128)),
            Arith::Lit(Literal::Real(r)) => Ok(Num::Real(*r)),
            Arith::Bin(op, lhs, rhs) => {
                let (a, b) = (lhs.eval(binding)?, rhs.eval(binding)?);
                match (a, b) {
                    (Num::Int(a), Num::Int(b)) => match op {
                        Op::Add => Ok(Num::Int(a + b)),
                        Op::Sub => Ok(Num::Int(a - b)),
                        Op::Mul => Ok(Num::Int(a * b)),
                        Op::Div if b == 0 => Err(EvalError::DivisionByZero),
                        Op::Div if a % b == 0 => Ok(Num::Int(a / b)),
                        Op::Div => Ok(Num::Real(a as f64 / b as f64)),
                    },
                    (a, b) => {
                        let (a, b) = (a.as_f64(), b.as_f64());
                        match op {
                            Op::Add => Ok(Num::Real(a + b)),
                            Op::Sub => Ok(Num::Real(a - b)),
                            Op::Mul => Ok(Num::Real(a * b)),
                            Op::Div if b == 0.0 => Err(EvalError::DivisionByZero),
                            Op::Div => Ok(Num::Real(a / b)),
                        }
                    }
                }
            }
        }
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Arith::Var(v) => out.push(v),
            Arith::Lit(_) => {}
            Arith::Bin(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8, right_operand: bool) -> fmt::Result {
        match self {
            Arith::Var(v) => f.write_str(v),
            Arith::Lit(l) => write!(f, "{l}"),
            Arith::Bin(op, l, r) => {
                let p = op.precedence();
                let wrap = p < parent || (p == parent && right_operand);
                if wrap {
                    f.write_str("(")?;
                }
                l.fmt_prec(f, p, false)?;
                write!(f, "{}", op.symbol())?;
                r.fmt_prec(f, p, true)?;
                if wrap {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Arith {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0, false)
    }
}

/// A tuple expression labelling an arc.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    pub terms: Vec<Term>,
}

impl Expression {
    pub fn parse(src: &str) -> Result<Expression, ParseError> {
        Parser::new(src)?.expression()
    }

    pub fn arity(&self) -> usize {
        self.terms.len()
    }

    /// Name of the identifier-carrying variable, if the first term is one.
    pub fn first_var(&self) -> Option<&str> {
        self.terms.first().and_then(Term::as_var)
    }

    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for t in &self.terms {
            t.collect_vars(&mut out);
        }
        out
    }

    /// Evaluates every term into the corresponding domain of `domains`.
    pub fn eval(&self, binding: &Binding, domains: &[DomainKind]) -> Result<Vec<Value>, EvalError> {
        if domains.len() != self.terms.len() {
            return Err(EvalError::Arity {
                expected: domains.len(),
                found: self.terms.len(),
            });
        }
        self.terms
            .iter()
            .zip(domains)
            .map(|(t, d)| t.eval(binding, *d))
            .collect()
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("variable `{0}` is not numeric")]
    NonNumeric(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("value {value} is outside domain {domain}")]
    OutOfDomain { value: Value, domain: DomainKind },
    #[error("expression has {found} terms, color has {expected} components")]
    Arity { expected: usize, found: usize },
}

/// Expression syntax error. `term` is the 1-based index of the tuple component
/// being parsed, `column` the 1-based character column.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("expression parse error at term {term} (column {column}): {message}")]
pub struct ParseError {
    pub term: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    Comma,
    Op(Op),
    Ident(String),
    Num(Literal),
    End,
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    term: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Parser, ParseError> {
        let chars: Vec<char> = src.chars().collect();
        let mut toks = Vec::new();
        let mut i = 0;
        let mut term = 1;
        let err = |column: usize, term: usize, message: String| ParseError {
            term,
            column,
            message,
        };
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            match c {
                c if c.is_whitespace() => {
                    i += 1;
                    continue;
                }
                '(' => toks.push((Tok::LParen, col)),
                ')' => toks.push((Tok::RParen, col)),
                ',' => {
                    term += 1;
                    toks.push((Tok::Comma, col))
                }
                '+' => toks.push((Tok::Op(Op::Add), col)),
                '-' => toks.push((Tok::Op(Op::Sub), col)),
                '*' => toks.push((Tok::Op(Op::Mul), col)),
                '/' => toks.push((Tok::Op(Op::Div), col)),
                c if c.is_ascii_digit() => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                        i += 1;
                    }
                    let text: String = chars[start..i].iter().collect();
                    let lit = if text.contains('.') {
                        text.parse::<f64>().map(Literal::Real).ok()
                    } else {
                        text.parse::<u64>().map(Literal::Int).ok()
                    };
                    let lit =
                        lit.ok_or_else(|| err(col, term, format!("malformed number `{text}`")))?;
                    toks.push((Tok::Num(lit), col));
                    continue;
                }
                c if c.is_alphabetic() || c == '_' => {
                    let start = i;
                    while i < chars.len()
                        && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'')
                    {
                        i += 1;
                    }
                    toks.push((Tok::Ident(chars[start..i].iter().collect()), col));
                    continue;
                }
                other => return Err(err(col, term, format!("unexpected character `{other}`"))),
            }
            i += 1;
        }
        toks.push((Tok::End, chars.len() + 1));
        Ok(Parser {
            toks,
            pos: 0,
            term: 1,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn column(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            term: self.term,
            column: self.column(),
            message: message.into(),
        }
    }

    fn expression(&mut self) -> Result<Expression, ParseError> {
        if self.bump() != Tok::LParen {
            self.pos = 0;
            return Err(self.error("expected `(`"));
        }
        let mut terms = Vec::new();
        loop {
            let arith = self.sum()?;
            terms.push(match arith {
                Arith::Var(v) => Term::Var(v),
                Arith::Lit(l) => Term::Const(l),
                f => Term::Func(f),
            });
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                    self.term += 1;
                }
                Tok::RParen => {
                    self.bump();
                    break;
                }
                _ => return Err(self.error("expected `,` or `)`")),
            }
        }
        if *self.peek() != Tok::End {
            return Err(self.error("trailing input after expression"));
        }
        Ok(Expression { terms })
    }

    fn sum(&mut self) -> Result<Arith, ParseError> {
        let mut lhs = self.product()?;
        while let Tok::Op(op @ (Op::Add | Op::Sub)) = *self.peek() {
            self.bump();
            let rhs = self.product()?;
            lhs = Arith::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Arith, ParseError> {
        let mut lhs = self.atom()?;
        while let Tok::Op(op @ (Op::Mul | Op::Div)) = *self.peek() {
            self.bump();
            let rhs = self.atom()?;
            lhs = Arith::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<Arith, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(Arith::Var(name))
            }
            Tok::Num(lit) => {
                self.bump();
                Ok(Arith::Lit(lit))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.sum()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.error("expected `)`"));
                }
                self.bump();
                Ok(inner)
            }
            _ => Err(self.error("expected a variable or number")),
        }
    }
}
