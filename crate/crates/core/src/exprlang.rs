//! A small expression language for real functions of one variable `t`.
//!
//! Grammar, loosest binding first: `+ -`, then `* /`, then unary minus, then
//! `^` (right-associative). Functions are called by name with parenthesised
//! arguments; `indicator(a, b)` is 1 on the half-open interval `(a, b]`.

use std::fmt;
use std::ops;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{DomainKind, Error, Result};

const MAX_NESTING: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
    Sqrt,
    Gamma,
    Min,
    Max,
    Indicator,
}

impl Func {
    pub const ALL: [Func; 10] = [
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Log,
        Func::Abs,
        Func::Sqrt,
        Func::Gamma,
        Func::Min,
        Func::Max,
        Func::Indicator,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Gamma => "gamma",
            Func::Min => "min",
            Func::Max => "max",
            Func::Indicator => "indicator",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max | Func::Indicator => 2,
            _ => 1,
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Expression tree. Trees produced by [`parse`] never contain negative
/// literals; a leading minus is always a [`Expr::Neg`] node.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    E,
    Pi,
    Var,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn num(x: f64) -> Expr {
        Expr::Num(x)
    }

    pub fn var() -> Expr {
        Expr::Var
    }

    pub fn call(func: Func, args: Vec<Expr>) -> Expr {
        assert_eq!(args.len(), func.arity(), "wrong arity for {}", func.name());
        Expr::Call(func, args)
    }

    pub fn indicator(a: f64, b: f64) -> Expr {
        Expr::Call(Func::Indicator, vec![Expr::lit(a), Expr::lit(b)])
    }

    pub fn abs(self) -> Expr {
        Expr::Call(Func::Abs, vec![self])
    }

    pub fn max(self, other: Expr) -> Expr {
        Expr::Call(Func::Max, vec![self, other])
    }

    pub fn powf(self, exponent: Expr) -> Expr {
        Expr::Bin(BinOp::Pow, Box::new(self), Box::new(exponent))
    }

    /// A literal in parser-normal form (negative values become `Neg`).
    pub fn lit(x: f64) -> Expr {
        if x < 0.0 {
            Expr::Neg(Box::new(Expr::Num(-x)))
        } else {
            Expr::Num(x)
        }
    }

    /// Evaluates at `t`; any domain violation or non-finite intermediate is an error.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let dom = |kind| Error::Domain { kind, t };
        let finite = |x: f64| {
            if x.is_finite() {
                Ok(x)
            } else {
                Err(dom(DomainKind::NonFinite))
            }
        };
        match self {
            Expr::Num(x) => finite(*x),
            Expr::E => Ok(std::f64::consts::E),
            Expr::Pi => Ok(std::f64::consts::PI),
            Expr::Var => finite(t),
            Expr::Neg(a) => Ok(-a.eval(t)?),
            Expr::Bin(op, a, b) => {
                let x = a.eval(t)?;
                let y = b.eval(t)?;
                match op {
                    BinOp::Add => finite(x + y),
                    BinOp::Sub => finite(x - y),
                    BinOp::Mul => finite(x * y),
                    BinOp::Div => {
                        if y == 0.0 {
                            Err(dom(DomainKind::DivisionByZero))
                        } else {
                            finite(x / y)
                        }
                    }
                    BinOp::Pow => {
                        if x == 0.0 && y < 0.0 {
                            Err(dom(DomainKind::DivisionByZero))
                        } else {
                            finite(x.powf(y))
                        }
                    }
                }
            }
            Expr::Call(func, args) => {
                let x = args[0].eval(t)?;
                match func {
                    Func::Sin => finite(x.sin()),
                    Func::Cos => finite(x.cos()),
                    Func::Exp => finite(x.exp()),
                    Func::Log => {
                        if x <= 0.0 {
                            Err(dom(DomainKind::LogNonPositive))
                        } else {
                            finite(x.ln())
                        }
                    }
                    Func::Abs => Ok(x.abs()),
                    Func::Sqrt => {
                        if x < 0.0 {
                            Err(dom(DomainKind::SqrtNegative))
                        } else {
                            Ok(x.sqrt())
                        }
                    }
                    Func::Gamma => {
                        if x <= 0.0 && x == x.floor() {
                            Err(dom(DomainKind::GammaPole))
                        } else if x == x.floor() && x <= 171.0 {
                            // exact factorials where double precision allows
                            finite((2..x as u64).fold(1.0, |acc, k| acc * k as f64))
                        } else {
                            finite(statrs::function::gamma::gamma(x))
                        }
                    }
                    Func::Min => Ok(x.min(args[1].eval(t)?)),
                    Func::Max => Ok(x.max(args[1].eval(t)?)),
                    Func::Indicator => {
                        let b = args[1].eval(t)?;
                        Ok(if x < t && t <= b { 1.0 } else { 0.0 })
                    }
                }
            }
        }
    }

    /// `self` with every occurrence of `t` replaced by `arg`.
    pub fn substitute(&self, arg: &Expr) -> Expr {
        match self {
            Expr::Var => arg.clone(),
            Expr::Num(_) | Expr::E | Expr::Pi => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(arg))),
            Expr::Bin(op, a, b) => Expr::Bin(
                *op,
                Box::new(a.substitute(arg)),
                Box::new(b.substitute(arg)),
            ),
            Expr::Call(f, args) => Expr::Call(*f, args.iter().map(|a| a.substitute(arg)).collect()),
        }
    }

    /// The value of an expression that does not depend on `t`.
    pub fn constant_value(&self) -> Option<f64> {
        fn free(e: &Expr) -> bool {
            match e {
                Expr::Var | Expr::Call(Func::Indicator, _) => false,
                Expr::Num(_) | Expr::E | Expr::Pi => true,
                Expr::Neg(a) => free(a),
                Expr::Bin(_, a, b) => free(a) && free(b),
                Expr::Call(_, args) => args.iter().all(free),
            }
        }
        if free(self) {
            self.eval(0.0).ok()
        } else {
            None
        }
    }

    /// Number of nodes, used to bound generated trees in tests.
    pub fn size(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::E | Expr::Pi | Expr::Var => 1,
            Expr::Neg(a) => 1 + a.size(),
            Expr::Bin(_, a, b) => 1 + a.size() + b.size(),
            Expr::Call(_, args) => 1 + args.iter().map(Expr::size).sum::<usize>(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Bin(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x:?}"),
            Expr::E => f.write_str("e"),
            Expr::Pi => f.write_str("pi"),
            Expr::Var => f.write_str("t"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                a.write_child(f, 3)
            }
            Expr::Bin(op, a, b) => {
                let (sym, left, right) = match op {
                    BinOp::Add => (" + ", 1, 2),
                    BinOp::Sub => (" - ", 1, 2),
                    BinOp::Mul => (" * ", 2, 3),
                    BinOp::Div => (" / ", 2, 3),
                    BinOp::Pow => ("^", 5, 3),
                };
                a.write_child(f, left)?;
                f.write_str(sym)?;
                b.write_child(f, right)
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

macro_rules! bin_impl {
    ($tr:ident, $method:ident, $op:expr) => {
        impl ops::$tr for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::Bin($op, Box::new(self), Box::new(rhs))
            }
        }
    };
}

bin_impl!(Add, add, BinOp::Add);
bin_impl!(Sub, sub, BinOp::Sub);
bin_impl!(Mul, mul, BinOp::Mul);
bin_impl!(Div, div, BinOp::Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

impl std::str::FromStr for Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Expr> {
        parse(s)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Expr, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lexeme = &text[start..i];
                let value: f64 = lexeme.parse().map_err(|_| Error::Syntax {
                    offset: start,
                    expected: vec!["number".into()],
                })?;
                if !value.is_finite() {
                    return Err(Error::Syntax {
                        offset: start,
                        expected: vec!["finite number".into()],
                    });
                }
                out.push((Tok::Num(value), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
                continue;
            }
            _ => {
                return Err(Error::Syntax {
                    offset: start,
                    expected: vec!["operator".into(), "operand".into()],
                })
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    depth: usize,
}

fn expected(offset: usize, what: &[&str]) -> Error {
    Error::Syntax {
        offset,
        expected: what.iter().map(|s| s.to_string()).collect(),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn enter(&mut self) -> Result<()> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(expected(self.offset(), &["shallower nesting"]));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Minus {
            self.bump();
            self.enter()?;
            let inner = self.unary()?;
            self.depth -= 1;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            self.enter()?;
            let exponent = self.unary()?;
            self.depth -= 1;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let offset = self.offset();
        match self.bump() {
            Tok::Num(x) => Ok(Expr::Num(x)),
            Tok::LParen => {
                let inner = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(expected(self.offset(), &[")", "operator"]));
                }
                self.bump();
                Ok(inner)
            }
            Tok::Ident(name) => match name.as_str() {
                "t" => Ok(Expr::Var),
                "e" => Ok(Expr::E),
                "pi" => Ok(Expr::Pi),
                _ => {
                    let func =
                        Func::from_name(&name).ok_or(Error::UnknownIdentifier { name, offset })?;
                    if *self.peek() != Tok::LParen {
                        return Err(expected(self.offset(), &["("]));
                    }
                    self.bump();
                    let mut args = Vec::with_capacity(func.arity());
                    for k in 0..func.arity() {
                        args.push(self.expr()?);
                        let want = if k + 1 == func.arity() {
                            Tok::RParen
                        } else {
                            Tok::Comma
                        };
                        if *self.peek() != want {
                            let label = if want == Tok::RParen { ")" } else { "," };
                            return Err(expected(self.offset(), &[label, "operator"]));
                        }
                        self.bump();
                    }
                    Ok(Expr::Call(func, args))
                }
            },
            _ => Err(expected(offset, &["number", "identifier", "(", "-"])),
        }
    }
}

pub fn parse(text: &str) -> Result<Expr> {
    if text.trim().is_empty() {
        return Err(expected(0, &["expression"]));
    }
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        depth: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(expected(p.offset(), &["operator", "end of input"]));
    }
    Ok(e)
}
