//! A tiny arithmetic language for scalar functions of time.
//!
//! Coefficients such as `a(t)` and delay functions such as `g(t) = t - 1`
//! are written as strings in this grammar:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?        (right-associative)
//! primary := number | 't' | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | exp | abs | sqrt
//! ```
//!
//! Numbers are decimal with an optional exponent (`1`, `0.5`, `.5`, `2e-3`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => {
                *offset
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero evaluating `{source_text}` at t = {t}")]
    DivisionByZero { source_text: String, t: f64 },
    #[error("non-finite value evaluating `{source_text}` at t = {t}")]
    NonFinite { source_text: String, t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 5] = [Func::Sin, Func::Cos, Func::Exp, Func::Abs, Func::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Abs => x.abs(),
            Func::Sqrt => x.sqrt(),
        }
    }
}

/// Expression tree. Literals produced by the parser are always nonnegative;
/// a leading minus becomes [`Expr::Neg`].
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Bin(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Box::new(arg))
    }

    /// Raw IEEE evaluation; `Err(())` only on an exact zero divisor.
    fn eval_raw(&self, t: f64) -> Result<f64, ()> {
        Ok(match self {
            Expr::Num(c) => *c,
            Expr::Var => t,
            Expr::Neg(e) => -e.eval_raw(t)?,
            Expr::Call(f, e) => f.apply(e.eval_raw(t)?),
            Expr::Bin(op, l, r) => {
                let l = l.eval_raw(t)?;
                let r = r.eval_raw(t)?;
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => {
                        if r == 0.0 {
                            return Err(());
                        }
                        l / r
                    }
                    BinOp::Pow => l.powf(r),
                }
            }
        })
    }

    /// True if the tree does not mention `t`.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::Var => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.is_constant(),
            Expr::Bin(_, l, r) => l.is_constant() && r.is_constant(),
        }
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesized so that re-parsing gives back the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(f, "{c:?}"),
            Expr::Var => f.write_str("t"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

/// A parsed scalar function of `t`. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarFn {
    ast: Expr,
    source: String,
}

impl ScalarFn {
    pub fn parse(text: &str) -> Result<ScalarFn, ParseError> {
        let ast = Parser::new(text).parse_all()?;
        Ok(ScalarFn {
            ast,
            source: text.to_string(),
        })
    }

    pub fn from_ast(ast: Expr) -> ScalarFn {
        let source = ast.to_string();
        ScalarFn { ast, source }
    }

    pub fn constant(c: f64) -> ScalarFn {
        if c < 0.0 {
            ScalarFn::from_ast(Expr::Neg(Box::new(Expr::Num(-c))))
        } else {
            ScalarFn::from_ast(Expr::Num(c))
        }
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        match self.ast.eval_raw(t) {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(_) => Err(EvalError::NonFinite {
                source_text: self.source.clone(),
                t,
            }),
            Err(()) => Err(EvalError::DivisionByZero {
                source_text: self.source.clone(),
                t,
            }),
        }
    }

    /// The value if the expression does not depend on `t`.
    pub fn as_constant(&self) -> Option<f64> {
        if self.ast.is_constant() {
            self.eval(0.0).ok()
        } else {
            None
        }
    }
}

impl fmt::Display for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl FromStr for ScalarFn {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScalarFn::parse(s)
    }
}

impl Serialize for ScalarFn {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for ScalarFn {
    /// Accepts either an expression string or a bare JSON number.
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(c) => Ok(ScalarFn::constant(c)),
            Raw::Text(s) => ScalarFn::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<(usize, Token)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Parser<'a> {
        Parser {
            src,
            tokens: Vec::new(),
            pos: 0,
        }
    }

    fn parse_all(mut self) -> Result<Expr, ParseError> {
        self.tokens = tokenize(self.src)?;
        if self.tokens.is_empty() {
            return Err(syntax(0, "empty expression"));
        }
        let e = self.expr()?;
        match self.tokens.get(self.pos) {
            None => Ok(e),
            Some((off, tok)) => Err(syntax(*off, &format!("unexpected {}", describe(tok)))),
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(o, _)| *o)
            .unwrap_or(self.src.len())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Some(Token::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::bin(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let off = self.offset();
        let Some(tok) = self.peek().cloned() else {
            return Err(syntax(off, "unexpected end of input"));
        };
        self.pos += 1;
        match tok {
            Token::Num(c) => Ok(Expr::Num(c)),
            Token::Ident(name) if name == "t" => Ok(Expr::Var),
            Token::Ident(name) => {
                let func = Func::from_name(&name).ok_or(ParseError::UnknownIdentifier {
                    offset: off,
                    name: name.clone(),
                })?;
                self.expect_lparen()?;
                let arg = self.expr()?;
                self.expect_rparen()?;
                Ok(Expr::call(func, arg))
            }
            Token::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            other => Err(syntax(off, &format!("unexpected {}", describe(&other)))),
        }
    }

    fn expect_lparen(&mut self) -> Result<(), ParseError> {
        let off = self.offset();
        match self.peek() {
            Some(Token::LParen) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(syntax(off, "expected `(` after function name")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        let off = self.offset();
        match self.peek() {
            Some(Token::RParen) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(syntax(off, "expected `)`")),
        }
    }
}

fn syntax(offset: usize, message: &str) -> ParseError {
    ParseError::Syntax {
        offset,
        message: message.to_string(),
    }
}

fn describe(tok: &Token) -> String {
    match tok {
        Token::Num(c) => format!("number {c}"),
        Token::Ident(s) => format!("identifier `{s}`"),
        Token::Op(c) => format!("operator `{c}`"),
        Token::LParen => "`(`".to_string(),
        Token::RParen => "`)`".to_string(),
    }
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push((i, Token::Op(c as char)));
                i += 1;
            }
            b'(' => {
                out.push((i, Token::LParen));
                i += 1;
            }
            b')' => {
                out.push((i, Token::RParen));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
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
                    } else {
                        return Err(syntax(j, "malformed exponent"));
                    }
                }
                let text = &src[start..i];
                let value = text
                    .parse::<f64>()
                    .map_err(|_| syntax(start, &format!("malformed number `{text}`")))?;
                out.push((start, Token::Num(value)));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Token::Ident(src[start..i].to_string())));
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(syntax(i, &format!("unexpected character `{ch}`")));
            }
        }
    }
    Ok(out)
}
