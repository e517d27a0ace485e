//! Tiny expression language for inline coefficients and sources.
//!
//! Grammar: numbers, `t`, `x`, `pi`, `+ - * /`, integer powers `^n`, unary
//! minus, parentheses and `sin(…)`, `cos(…)`. Time derivatives are formed
//! symbolically.

use std::fmt;

use crate::error::{Error, Result};
use crate::waveq1d::SpaceTimeFunction;

/// Number of symbolic time derivatives kept by [`CompiledExpr`].
pub const MAX_TIME_DERIVATIVE: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    T,
    X,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, i32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

use Expr::*;

fn num(v: f64) -> Expr {
    Num(v)
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(x), Num(y)) => Num(x + y),
        (Num(z), e) | (e, Num(z)) if z == 0.0 => e,
        (a, b) => Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(x), Num(y)) => Num(x - y),
        (e, Num(z)) if z == 0.0 => e,
        (Num(z), e) if z == 0.0 => neg(e),
        (a, b) => Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(x), Num(y)) => Num(x * y),
        (Num(z), _) | (_, Num(z)) if z == 0.0 => Num(0.0),
        (Num(o), e) | (e, Num(o)) if o == 1.0 => e,
        (a, b) => Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(z), _) if z == 0.0 => Num(0.0),
        (e, Num(o)) if o == 1.0 => e,
        (a, b) => Div(Box::new(a), Box::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Num(x) => Num(-x),
        Neg(e) => *e,
        e => Neg(Box::new(e)),
    }
}

fn pow(a: Expr, n: i32) -> Expr {
    match (a, n) {
        (_, 0) => Num(1.0),
        (e, 1) => e,
        (Num(x), n) => Num(x.powi(n)),
        (e, n) => Pow(Box::new(e), n),
    }
}

impl Expr {
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            Num(v) => *v,
            T => t,
            X => x,
            Add(a, b) => a.eval(t, x) + b.eval(t, x),
            Sub(a, b) => a.eval(t, x) - b.eval(t, x),
            Mul(a, b) => a.eval(t, x) * b.eval(t, x),
            Div(a, b) => a.eval(t, x) / b.eval(t, x),
            Neg(a) => -a.eval(t, x),
            Pow(a, n) => a.eval(t, x).powi(*n),
            Sin(a) => a.eval(t, x).sin(),
            Cos(a) => a.eval(t, x).cos(),
        }
    }

    /// `∂/∂t`.
    pub fn dt(&self) -> Expr {
        match self {
            Num(_) | X => num(0.0),
            T => num(1.0),
            Add(a, b) => add(a.dt(), b.dt()),
            Sub(a, b) => sub(a.dt(), b.dt()),
            Mul(a, b) => add(mul(a.dt(), (**b).clone()), mul((**a).clone(), b.dt())),
            Div(a, b) => div(
                sub(mul(a.dt(), (**b).clone()), mul((**a).clone(), b.dt())),
                pow((**b).clone(), 2),
            ),
            Neg(a) => neg(a.dt()),
            Pow(a, n) => mul(mul(num(*n as f64), pow((**a).clone(), n - 1)), a.dt()),
            Sin(a) => mul(Cos(a.clone()), a.dt()),
            Cos(a) => neg(mul(Sin(a.clone()), a.dt())),
        }
    }

    pub fn depends_on_t(&self) -> bool {
        match self {
            Num(_) | X => false,
            T => true,
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => a.depends_on_t() || b.depends_on_t(),
            Neg(a) | Pow(a, _) | Sin(a) | Cos(a) => a.depends_on_t(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num(v) => write!(f, "{v}"),
            T => write!(f, "t"),
            X => write!(f, "x"),
            Add(a, b) => write!(f, "({a} + {b})"),
            Sub(a, b) => write!(f, "({a} - {b})"),
            Mul(a, b) => write!(f, "({a} * {b})"),
            Div(a, b) => write!(f, "({a} / {b})"),
            Neg(a) => write!(f, "-{a}"),
            Pow(a, n) => write!(f, "{a}^{n}"),
            Sin(a) => write!(f, "sin({a})"),
            Cos(a) => write!(f, "cos({a})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part such as 1e-3
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Expression(format!("bad number {text:?}")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat_op(&mut self, op: char) -> bool {
        if self.peek() == Some(&Token::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: char) -> Result<()> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(Error::Expression(format!("expected {op:?}")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_op('+') {
                lhs = Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_op('-') {
                lhs = Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op('*') {
                lhs = Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_op('/') {
                lhs = Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_op('-') {
            return Ok(Neg(Box::new(self.unary()?)));
        }
        if self.eat_op('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if !self.eat_op('^') {
            return Ok(base);
        }
        let negative = self.eat_op('-');
        match self.peek().cloned() {
            Some(Token::Num(v)) if v.fract() == 0.0 && v.abs() <= 64.0 => {
                self.pos += 1;
                let n = v as i32;
                Ok(Pow(Box::new(base), if negative { -n } else { n }))
            }
            _ => Err(Error::Expression("exponent must be an integer literal".into())),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Num(v))
            }
            Some(Token::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "t" => Ok(T),
                    "x" => Ok(X),
                    "pi" => Ok(Num(std::f64::consts::PI)),
                    "sin" | "cos" => {
                        self.expect_op('(')?;
                        let arg = self.expr()?;
                        self.expect_op(')')?;
                        Ok(if name == "sin" { Sin(Box::new(arg)) } else { Cos(Box::new(arg)) })
                    }
                    other => Err(Error::Expression(format!("unknown name {other:?}"))),
                }
            }
            Some(Token::Op(c)) => Err(Error::Expression(format!("unexpected {c:?}"))),
            None => Err(Error::Expression("unexpected end of input".into())),
        }
    }
}

pub fn parse(src: &str) -> Result<Expr> {
    let tokens = tokenize(src)?;
    if tokens.is_empty() {
        return Err(Error::Expression("empty expression".into()));
    }
    let mut p = Parser { tokens, pos: 0 };
    let e = p.expr()?;
    if p.pos != p.tokens.len() {
        return Err(Error::Expression(format!("trailing input in {src:?}")));
    }
    Ok(e)
}

/// An expression together with its first [`MAX_TIME_DERIVATIVE`] time derivatives.
#[derive(Clone, Debug)]
pub struct CompiledExpr {
    source: String,
    derivatives: Vec<Expr>,
}

impl CompiledExpr {
    pub fn new(src: &str) -> Result<Self> {
        let mut derivatives = vec![parse(src)?];
        for _ in 0..MAX_TIME_DERIVATIVE {
            let next = derivatives.last().unwrap().dt();
            derivatives.push(next);
        }
        Ok(Self {
            source: src.to_string(),
            derivatives,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, t: f64, j: usize, x: f64) -> f64 {
        self.derivatives[j].eval(t, x)
    }

    pub fn derivative(&self, j: usize) -> &Expr {
        &self.derivatives[j]
    }

    pub fn into_field(self) -> SpaceTimeFunction {
        SpaceTimeFunction::new(MAX_TIME_DERIVATIVE, move |t, j, x| self.eval(t, j, x))
    }
}
